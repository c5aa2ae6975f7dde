//! Membership questions for rank-one operators, and for rank-one `S` in
//! the algebra of a WCE operator.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::hilbert::{kernel_with, op_norm_with, project, LinOperator, MFunction, Subspace};
use crate::settings::Settings;
use crate::sra::membership::{
    classify_bounded, classify_decay, conjugation_norms, power_params, MembershipVerdict,
    QtMembership,
};
use crate::sra::rm::{weighted_sum, RmFamily};
use crate::wce::WceOp;

/// Relative tolerance of the `S = (I - P) S P` test.
pub const RANK_ONE_QT_TOL: f64 = 1e-9;

fn line_projection(y: &MFunction) -> Result<LinOperator> {
    Ok(project(&Subspace::span(y.space(), std::slice::from_ref(y), 1e-14)?))
}

/// `S ∈ Q_{x ⊗ y}` iff `S = (I - P) S P` with `P` the projection onto
/// `span{y}`; the decay of `||R_m S R_m^{-1}||` is sampled alongside.
pub fn rank_one_qt(
    x: &MFunction,
    y: &MFunction,
    s: &LinOperator,
    settings: &Settings,
) -> Result<QtMembership> {
    let holds = rank_one_qt_criterion(y, s, settings)?;
    let s_norm = op_norm_with(s, &power_params(settings))?;
    let family = RmFamily::rank_one(x, y)?;
    let evidence = conjugation_norms(&family, s, &settings.m_grid(), settings)?;
    let mut flags = BTreeMap::new();
    flags.insert("s_equals_(i-p)sp".to_string(), holds);
    Ok(QtMembership {
        holds,
        verdict: MembershipVerdict {
            verdict: classify_decay(&evidence, s_norm),
            evidence,
            criterion_flags: flags,
        },
    })
}

/// `S = (I - P) S P` with `P` onto `span{y}`, within `1e-9 ||S||`.
pub fn rank_one_qt_criterion(y: &MFunction, s: &LinOperator, settings: &Settings) -> Result<bool> {
    let params = power_params(settings);
    let p = line_projection(y)?;
    let id = LinOperator::identity(s.space());
    let shaped = &(&(&id - &p) * s) * &p;
    let s_norm = op_norm_with(s, &params)?;
    Ok(op_norm_with(&(s - &shaped), &params)? <= RANK_ONE_QT_TOL * s_norm)
}

/// `S ∈ B_{x ⊗ w}` iff the kernel `{w}^⊥` is `S`-invariant, i.e.
/// `P S (I - P) = 0` with `P` onto `span{w}`. Here the kernel is computed
/// from the matrix of `x ⊗ w` itself, so the test does depend on `x`
/// numerically.
pub fn rank_one_bt_criterion(
    x: &MFunction,
    w: &MFunction,
    s: &LinOperator,
    settings: &Settings,
) -> Result<bool> {
    let t = crate::hilbert::rank_one(x, w)?;
    let h2 = kernel_with(&t, settings.tol.rank);
    let p2 = project(&h2);
    let id = LinOperator::identity(s.space());
    let leak = &(&(&id - &p2) * s) * &p2;
    let params = power_params(settings);
    let s_norm = op_norm_with(s, &params)?;
    Ok(op_norm_with(&leak, &params)? <= settings.tol.inv * s_norm)
}

/// `B_{x ⊗ w}` and `B_{y ⊗ w}` select the same members of `batch`.
pub fn rank_one_bt_invariance(
    w: &MFunction,
    x: &MFunction,
    y: &MFunction,
    batch: &[LinOperator],
    settings: &Settings,
) -> Result<bool> {
    for s in batch {
        if rank_one_bt_criterion(x, w, s, settings)? != rank_one_bt_criterion(y, w, s, settings)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `f ⊗ g ∈ B_T` for a WCE operator `T`, from
/// `||R_m (f ⊗ g) R_m^{-1}|| = ||R_m f|| ||R_m^{-1} g||` with
/// `||R_m f||^2 = ||f||^2 + sum mu v_m |E(uf)|^2` and
/// `||R_m^{-1} g||^2 = ||g||^2 - sum mu (v_m / q_m) |E(ug)|^2`.
///
/// The evidence holds the square root of that product. The flag
/// `printed_form_bounded` records whether the variant
/// `A ||f||^2 + V (||g||^2 + A)`, with `V = sum mu v_m |E(uf)|^2` and
/// `A = sum mu v_m/(v_m E(|u|^2) - 1) |E(ug)|^2`, stays bounded.
pub fn rank_one_in_bt_wce(
    t: &WceOp,
    f: &MFunction,
    g: &MFunction,
    settings: &Settings,
) -> Result<MembershipVerdict> {
    crate::hilbert::inner(f, g)?;
    let family = RmFamily::wce(t);
    let p = t.partition();
    let euf = p.expect(&t.u().mul(f));
    let eug = p.expect(&t.u().mul(g));
    let (f2, g2) = (f.norm_sqr(), g.norm_sqr());

    let mut evidence = Vec::new();
    let mut printed = Vec::new();
    for m in settings.m_grid() {
        let fwd = family.forward_norm_sqr(m, f).expect("wce source");
        let inv = family.inverse_norm_sqr(m, g).expect("wce source");
        evidence.push((m, (fwd * inv).max(0.0).sqrt()));

        let v = weighted_sum(&family.v(m).expect("wce source"), &euf);
        let a = weighted_sum(&family.alpha_printed(m).expect("wce source"), &eug);
        printed.push((m, (a * f2 + v * (g2 + a)).abs().sqrt()));
    }
    let mut flags = BTreeMap::new();
    flags.insert(
        "printed_form_bounded".to_string(),
        classify_bounded(&printed) == crate::sra::Verdict::Member,
    );
    Ok(MembershipVerdict {
        verdict: classify_bounded(&evidence),
        evidence,
        criterion_flags: flags,
    })
}
