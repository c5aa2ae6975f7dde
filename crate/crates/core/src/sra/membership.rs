//! Membership in the spectral radius algebra `B_T` and in `Q_T`.
//!
//! Two independent routes are provided for each question: the definitional
//! one samples `g(m) = ||R_m S R_m^{-1}||` on a dyadic grid of `m` and
//! classifies the sequence, and the structural one tests subspace relations
//! of `S` against `H_2 = N(E M_u)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hilbert::{op_norm_with, LinOperator, PowerIteration};
use crate::settings::Settings;
use crate::sra::blocks::{block_decompose, BlockDecomp};
use crate::sra::rm::RmFamily;
use crate::wce::WceOp;

/// Relative spread of the last three samples accepted as "stabilized".
pub const STABLE_SPREAD: f64 = 0.01;
/// Log-log slope over the last four samples that signals divergence.
pub const GROWTH_SLOPE: f64 = 0.25;
/// `g(m_max) / ||S||` below which a decaying sequence counts as tending to zero.
pub const DECAY_LEVEL: f64 = 1e-3;
/// Log-log slope over the last four samples at or below which a non-increasing
/// sequence counts as power-law decay to zero.
pub const DECAY_SLOPE: f64 = -0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Member,
    NonMember,
    Inconclusive,
}

/// A membership answer together with the samples that support it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub verdict: Verdict,
    /// `(m, g(m))` in ascending `m`.
    pub evidence: Vec<(u64, f64)>,
    pub criterion_flags: BTreeMap<String, bool>,
}

fn log_slope(samples: &[(u64, f64)]) -> Option<f64> {
    if samples.iter().any(|&(_, g)| !(g > 0.0) || !g.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = samples.iter().map(|&(m, _)| (m as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, g)| g.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn tail(samples: &[(u64, f64)], k: usize) -> &[(u64, f64)] {
    &samples[samples.len().saturating_sub(k)..]
}

fn stabilized(samples: &[(u64, f64)]) -> bool {
    let last = tail(samples, 3);
    let hi = last.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = last.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    hi.is_finite() && hi - lo <= STABLE_SPREAD * hi
}

fn non_increasing(samples: &[(u64, f64)], scale: f64) -> bool {
    tail(samples, 4)
        .windows(2)
        .all(|w| w[1].1.is_finite() && w[1].1 <= w[0].1 * (1.0 + 1e-9) + 1e-12 * scale)
}

/// Bounded-versus-divergent classification of a sampled sequence.
///
/// * `Member` when the last three samples agree within 1 %, or the last four
///   are non-increasing (a bounded, settling sequence);
/// * `NonMember` when a sample is infinite, or the least-squares log-log
///   slope over the last four samples exceeds 0.25;
/// * `Inconclusive` otherwise.
pub fn classify_bounded(samples: &[(u64, f64)]) -> Verdict {
    if samples.len() < 4 {
        return Verdict::Inconclusive;
    }
    if samples.iter().any(|s| !s.1.is_finite()) {
        return Verdict::NonMember;
    }
    let scale = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    if scale == 0.0 || stabilized(samples) || non_increasing(samples, scale) {
        return Verdict::Member;
    }
    match log_slope(tail(samples, 4)) {
        Some(s) if s > GROWTH_SLOPE => Verdict::NonMember,
        _ => Verdict::Inconclusive,
    }
}

/// Tends-to-zero classification used for `Q_T`; `Member` means `g(m) -> 0`.
///
/// * `NonMember` when the sequence diverges, or stabilizes above `DECAY_LEVEL * ||S||`;
/// * `Member` when the last four samples are non-increasing and either end
///   below `DECAY_LEVEL * ||S||` or fall with log-log slope at most -0.25;
/// * `Inconclusive` otherwise.
pub fn classify_decay(samples: &[(u64, f64)], s_norm: f64) -> Verdict {
    if s_norm == 0.0 {
        return Verdict::Member;
    }
    if samples.len() < 4 {
        return Verdict::Inconclusive;
    }
    let last = samples[samples.len() - 1].1;
    if classify_bounded(samples) == Verdict::NonMember {
        return Verdict::NonMember;
    }
    if non_increasing(samples, s_norm) {
        if last <= DECAY_LEVEL * s_norm {
            return Verdict::Member;
        }
        if log_slope(tail(samples, 4)).is_some_and(|s| s <= DECAY_SLOPE) {
            return Verdict::Member;
        }
    }
    if stabilized(samples) && last > DECAY_LEVEL * s_norm {
        return Verdict::NonMember;
    }
    Verdict::Inconclusive
}

pub(crate) fn power_params(settings: &Settings) -> PowerIteration {
    PowerIteration::from_tolerances(&settings.tol, settings.seed)
}

/// `(m, ||R_m S R_m^{-1}||)` over `grid`, in grid order.
pub fn conjugation_norms(
    family: &RmFamily,
    s: &LinOperator,
    grid: &[u64],
    settings: &Settings,
) -> Result<Vec<(u64, f64)>> {
    let params = power_params(settings);
    grid.par_iter()
        .map(|&m| {
            let conj = &(&family.r_m(m) * s) * &family.r_m_inv(m);
            Ok((m, op_norm_with(&conj, &params)?))
        })
        .collect()
}

/// Definitional test of `sup_m ||R_m S R_m^{-1}|| < inf`.
pub fn bt_member_definitional(
    family: &RmFamily,
    s: &LinOperator,
    settings: &Settings,
) -> Result<MembershipVerdict> {
    let evidence = conjugation_norms(family, s, &settings.m_grid(), settings)?;
    Ok(MembershipVerdict {
        verdict: classify_bounded(&evidence),
        evidence,
        criterion_flags: BTreeMap::new(),
    })
}

/// Largest `||P S h|| / (||S|| ||h||)` over the basis vectors `h` of `from`.
fn leakage(p: &LinOperator, s: &LinOperator, from: &crate::hilbert::Subspace, s_norm: f64) -> f64 {
    if s_norm == 0.0 {
        return 0.0;
    }
    from.basis()
        .iter()
        .map(|h| p.apply(&s.apply(h)).norm() / (s_norm * h.norm()))
        .fold(0.0, f64::max)
}

/// Structural relations of `S` to the splitting, as relative leakages.
#[derive(Debug, Clone, Copy)]
pub struct BlockLeakage {
    /// `||P1 S|_{H2}||`: failure of `H2` invariance (the `Y` block).
    pub y: f64,
    /// `||S|_{H2}||`: failure of `H2 ⊆ N(S)`.
    pub h2_to_any: f64,
    /// `||P1 S|_{H1}||`: the `X` block.
    pub x: f64,
}

pub fn block_leakage(d: &BlockDecomp, s: &LinOperator, settings: &Settings) -> Result<BlockLeakage> {
    let s_norm = op_norm_with(s, &power_params(settings))?;
    let id = LinOperator::identity(s.space());
    Ok(BlockLeakage {
        y: leakage(&d.p1, s, &d.h2, s_norm),
        h2_to_any: leakage(&id, s, &d.h2, s_norm),
        x: leakage(&d.p1, s, &d.h1, s_norm),
    })
}

/// `N(E M_u)` is invariant under `S`.
pub fn bt_member_kernel_criterion(t: &WceOp, s: &LinOperator, settings: &Settings) -> Result<bool> {
    let d = block_decompose(t, &settings.tol)?;
    bt_kernel_criterion_with(&d, s, settings)
}

pub fn bt_kernel_criterion_with(d: &BlockDecomp, s: &LinOperator, settings: &Settings) -> Result<bool> {
    Ok(block_leakage(d, s, settings)?.y <= settings.tol.inv)
}

/// Outcome of the `Q_T` test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtMembership {
    /// Structural criterion: `H_2` is `S`-invariant, `H_2 ⊆ N(S)` and
    /// `P_1 S P_1 = 0`; together, `S = P_2 S P_1`.
    pub holds: bool,
    pub verdict: MembershipVerdict,
}

/// Tests `S ∈ Q_T`, i.e. `||R_m S R_m^{-1}|| -> 0`.
///
/// The structural route requires the `X` block to vanish in addition to
/// the two kernel conditions: with `R_m = q_m^{1/2} ⊕ I`, the `X` block is
/// conjugated by `q_m^{±1/2}` and does not decay. Both the full criterion and
/// the kernel-only variant are reported in `criterion_flags`.
pub fn qt_member(t: &WceOp, s: &LinOperator, settings: &Settings) -> Result<QtMembership> {
    let d = block_decompose(t, &settings.tol)?;
    qt_member_with(&RmFamily::wce(t), &d, s, settings)
}

/// `(H2 invariant, H2 ⊆ N(S), X = 0)`.
fn qt_conditions(d: &BlockDecomp, s: &LinOperator, settings: &Settings) -> Result<(bool, bool, bool)> {
    let tol = settings.tol.inv;
    let leak = block_leakage(d, s, settings)?;
    Ok((leak.y <= tol, leak.h2_to_any <= tol, leak.x <= tol))
}

/// The structural `Q_T` criterion alone, without sampling.
pub fn qt_criterion(d: &BlockDecomp, s: &LinOperator, settings: &Settings) -> Result<bool> {
    let (a, b, c) = qt_conditions(d, s, settings)?;
    Ok(a && b && c)
}

pub fn qt_member_with(
    family: &RmFamily,
    d: &BlockDecomp,
    s: &LinOperator,
    settings: &Settings,
) -> Result<QtMembership> {
    let (invariant, in_kernel, x_zero) = qt_conditions(d, s, settings)?;
    let holds = invariant && in_kernel && x_zero;

    let s_norm = op_norm_with(s, &power_params(settings))?;
    let evidence = conjugation_norms(family, s, &settings.m_grid(), settings)?;
    let mut flags = BTreeMap::new();
    flags.insert("h2_invariant".to_string(), invariant);
    flags.insert("h2_in_kernel".to_string(), in_kernel);
    flags.insert("x_block_zero".to_string(), x_zero);
    flags.insert("kernel_only_criterion".to_string(), invariant && in_kernel);
    Ok(QtMembership {
        holds,
        verdict: MembershipVerdict {
            verdict: classify_decay(&evidence, s_norm),
            evidence,
            criterion_flags: flags,
        },
    })
}
