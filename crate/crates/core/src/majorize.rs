//! Majorization: `T` majorizes `S` when `||Sx|| <= M ||Tx||` for all `x`.
//! In finite dimension every range is closed, so this happens exactly when
//! `N(T) ⊆ N(S)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    kernel_with, matrix_norm, rank_one, CMatrix, CVector, LinOperator, MFunction, C64,
};
use crate::settings::Settings;
use crate::sra::membership::power_params;
use crate::sra::{block_decompose, qt_criterion, rank_one_qt_criterion};
use crate::wce::{support, WceOp};

/// Random directions used to spot-check a computed constant.
pub const SPOT_CHECKS: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MajorizationResult {
    pub holds: bool,
    /// Minimal constant `M` when `holds`.
    pub constant: Option<f64>,
    /// Unit vector in `N(T)` that `S` does not annihilate, when not `holds`.
    #[serde(skip)]
    pub witness: Option<MFunction>,
    /// Spot-check directions with `||Sx|| > M (1 + 1e-8) ||Tx|| + 1e-9 ||Tx||`.
    pub spot_violations: usize,
}

/// Decides `N(T) ⊆ N(S)` by the largest principal-angle sine and computes
/// `M = sup_{x ⊥ N(T)} ||Sx|| / ||Tx||` as the norm of `S Q (T Q)^+`, with
/// `Q` an orthonormal basis of `N(T)^⊥`.
pub fn majorizes(t: &LinOperator, s: &LinOperator, settings: &Settings) -> Result<MajorizationResult> {
    if !crate::hilbert::same_space(t.space(), s.space()) {
        return Err(Error::usage("majorization needs operators on the same space"));
    }
    let tol = &settings.tol;
    let nt = kernel_with(t, tol.rank);
    let ns = kernel_with(s, tol.rank);
    if nt.max_sine_to(&ns) > tol.angle {
        let witness = nt
            .basis()
            .into_iter()
            .map(|h| (s.apply(&h).norm(), h))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, h)| h);
        return Ok(MajorizationResult {
            holds: false,
            constant: None,
            witness,
            spot_violations: 0,
        });
    }

    let q = nt.complement().frame_basis().clone();
    let constant = if q.ncols() == 0 {
        0.0
    } else {
        let tq = t.to_frame() * &q;
        let d = crate::hilbert::svd(&tq, false)?;
        let inv_sigma = CMatrix::from_diagonal(&CVector::from_iterator(
            d.s.len(),
            d.s.iter().map(|&x| C64::new(1.0 / x, 0.0)),
        ));
        let pinv = &d.v * inv_sigma * d.u.adjoint();
        matrix_norm(&(s.to_frame() * &q * pinv), &power_params(settings))?
    };

    let spot_violations = spot_check(t, s, constant, settings.seed);
    Ok(MajorizationResult {
        holds: true,
        constant: Some(constant),
        witness: None,
        spot_violations,
    })
}

fn spot_check(t: &LinOperator, s: &LinOperator, m: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5107_C4EC);
    let space = t.space();
    let s_scale = s.max_abs() * space.dim() as f64;
    (0..SPOT_CHECKS)
        .filter(|_| {
            let vals = (0..space.dim())
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let x = MFunction::new(space, vals).expect("dimension");
            let tx = t.apply(&x).norm();
            let sx = s.apply(&x).norm();
            sx > m * (1.0 + 1e-8) * tx + 1e-9 * tx + 1e-12 * s_scale * x.norm()
        })
        .count()
}

/// `z(E(u)) = z(E(|u|^2))` and `E(u) >= delta` (real) on the support of
/// `E(|u|^2)`. Finite-dimensional ranges are closed regardless; this only
/// evaluates the hypothesis.
pub fn closed_range_hypothesis(t: &WceOp, delta: f64, settings: &Settings) -> Result<bool> {
    if !(delta > 0.0) {
        return Err(Error::usage("delta must be positive"));
    }
    let eu = t.partition().expect(t.u());
    let zt = settings.tol.supp;
    let live_u2 = support(t.e_u2(), zt);
    let live_u = support(&eu, zt);
    let scale = eu.sup_norm();
    Ok(live_u == live_u2
        && (0..eu.dim()).filter(|&i| live_u2[i]).all(|i| {
            let z = eu.get(i);
            z.im.abs() <= zt * scale && z.re >= delta
        }))
}

/// Smallest nonzero value of `|E(u)|`, the natural `delta` for
/// [`closed_range_hypothesis`].
pub fn natural_delta(t: &WceOp, settings: &Settings) -> Option<f64> {
    let eu = t.partition().expect(t.u());
    let live = support(&eu, settings.tol.supp);
    (0..eu.dim())
        .filter(|&i| live[i])
        .map(|i| eu.get(i).norm())
        .min_by(f64::total_cmp)
}

/// Outcome of a "criterion implies majorization" check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Implication {
    /// Premise held and majorization held with this constant.
    Holds { constant: f64 },
    /// Premise held but majorization failed.
    Violated,
    /// Premise false.
    Vacuous,
}

impl Implication {
    pub fn is_true(&self) -> bool {
        !matches!(self, Implication::Violated)
    }
}

/// If `u >= 0`, `E(u) >= delta` on its support and `S ∈ Q_T`, then `E M_u`
/// majorizes `S`.
pub fn qt_majorization_suite(t: &WceOp, s: &LinOperator, settings: &Settings) -> Result<Implication> {
    if t.u().values().iter().any(|z| z.im != 0.0 || z.re < 0.0) {
        return Err(Error::usage("u must be nonnegative"));
    }
    let delta = natural_delta(t, settings)
        .ok_or_else(|| Error::usage("E(u) vanishes identically"))?;
    if !closed_range_hypothesis(t, delta, settings)? {
        return Err(Error::usage("E(u) must be bounded below on its support"));
    }
    let d = block_decompose(t, &settings.tol)?;
    if !qt_criterion(&d, s, settings)? {
        return Ok(Implication::Vacuous);
    }
    let r = majorizes(&t.e_mu(), s, settings)?;
    Ok(match r.constant {
        Some(constant) if r.holds => Implication::Holds { constant },
        _ => Implication::Violated,
    })
}

/// If `S ∈ Q_{x ⊗ y}` then `x ⊗ y` majorizes `S`.
pub fn rank_one_majorization(
    x: &MFunction,
    y: &MFunction,
    s: &LinOperator,
    settings: &Settings,
) -> Result<Implication> {
    if x.norm() == 0.0 || y.norm() == 0.0 {
        return Err(Error::usage("x and y must be nonzero"));
    }
    if !rank_one_qt_criterion(y, s, settings)? {
        return Ok(Implication::Vacuous);
    }
    let r = majorizes(&rank_one(x, y)?, s, settings)?;
    Ok(match r.constant {
        Some(constant) if r.holds => Implication::Holds { constant },
        _ => Implication::Violated,
    })
}

/// `||S x|| / ||T x||` maximized by brute force over the unit sphere of
/// `N(T)^⊥` sampled with `k` random directions; a lower bound for `M`.
#[cfg(test)]
fn brute_force_ratio(t: &LinOperator, s: &LinOperator, k: usize, seed: u64) -> f64 {
    let nt = kernel_with(t, 1e-10).complement();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = nt.basis();
    let mut best = 0.0f64;
    for _ in 0..k {
        let mut x = MFunction::zero(t.space());
        for b in &basis {
            let c = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            x = x.add(&b.scale(c));
        }
        let tx = t.apply(&x).norm();
        if tx > 0.0 {
            best = best.max(s.apply(&x).norm() / tx);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{op_norm, MeasureSpace};
    use crate::testutil::*;
    use proptest::prelude::*;

    fn diag(space: &std::sync::Arc<MeasureSpace>, d: &[f64]) -> LinOperator {
        LinOperator::multiplication(&MFunction::from_real(space, d).unwrap())
    }

    #[test]
    fn diagonal_example_has_constant_two() {
        let s3 = MeasureSpace::uniform(3);
        let t = diag(&s3, &[1.0, 1.0, 0.0]);
        let s = diag(&s3, &[0.0, 2.0, 0.0]);
        let r = majorizes(&t, &s, &Settings::default()).unwrap();
        assert!(r.holds);
        assert!((r.constant.unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(r.spot_violations, 0);
    }

    #[test]
    fn zero_t_fails_with_witness() {
        let s3 = MeasureSpace::uniform(3);
        let z = LinOperator::zero(&s3);
        let s = diag(&s3, &[0.0, 2.0, 0.0]);
        let r = majorizes(&z, &s, &Settings::default()).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert!(z.apply(&w).norm() < 1e-10);
        assert!(s.apply(&w).norm() > 1e-10);
    }

    #[test]
    fn kernel_inclusion_agrees_with_brute_force() {
        let settings = Settings::default();
        for seed in 0..40 {
            let t = random_wce(seed, Profile::Generic);
            let space = t.space().clone();
            // S = A T (majorized) or S = A (generally not).
            let a = LinOperator::new(&space, random_matrix(seed, space.dim())).unwrap();
            let s1 = &a * t.matrix();
            let r = majorizes(t.matrix(), &s1, &settings).unwrap();
            assert!(r.holds, "seed {seed}");
            let m = r.constant.unwrap();
            assert!(m <= op_norm(&a).unwrap() * (1.0 + 1e-8));
            assert!(brute_force_ratio(t.matrix(), &s1, 200, seed) <= m * (1.0 + 1e-8));
            assert_eq!(r.spot_violations, 0);

            let r = majorizes(t.matrix(), &a, &settings).unwrap();
            let kernel_nontrivial = kernel_with(t.matrix(), 1e-10).dim() > 0;
            assert_eq!(r.holds, !kernel_nontrivial, "seed {seed}");
        }
    }

    #[test]
    fn closed_range_examples() {
        let settings = Settings::default();
        let t = instance_i1();
        assert!(closed_range_hypothesis(&t, 1.0, &settings).unwrap());
        assert!(!closed_range_hypothesis(&t, 1.6, &settings).unwrap());
        // u = (1, -1, 1, 1): E(u) = 0 on the first block, E(|u|^2) = 1 there.
        assert!(!closed_range_hypothesis(&instance_i2(), 0.5, &settings).unwrap());
        assert!(closed_range_hypothesis(&t, 0.0, &settings).is_err());
        for seed in 0..20 {
            let t = random_wce(seed, Profile::Nonneg);
            let d = natural_delta(&t, &settings).unwrap();
            assert!(closed_range_hypothesis(&t, d, &settings).unwrap());
        }
    }

    #[test]
    fn q_majorization_examples() {
        let settings = Settings::default();
        let t = instance_i1();
        let z = LinOperator::zero(t.space());
        assert!(qt_majorization_suite(&t, &z, &settings).unwrap().is_true());
        let d = block_decompose(&t, &settings.tol).unwrap();
        let s = &(&d.p2 * &LinOperator::new(t.space(), random_matrix(3, 4)).unwrap()) * &d.p1;
        assert!(matches!(
            qt_majorization_suite(&t, &s, &settings).unwrap(),
            Implication::Holds { .. }
        ));
        let id = LinOperator::identity(t.space());
        assert_eq!(qt_majorization_suite(&t, &id, &settings).unwrap(), Implication::Vacuous);
        assert!(qt_majorization_suite(&instance_i2(), &z, &settings).is_err());

        let s3 = MeasureSpace::uniform(3);
        let (e0, e1, e2) = (MFunction::basis(&s3, 0), MFunction::basis(&s3, 1), MFunction::basis(&s3, 2));
        let s = rank_one(&e2, &e1).unwrap();
        assert!(matches!(
            rank_one_majorization(&e0, &e1, &s, &settings).unwrap(),
            Implication::Holds { .. }
        ));
        assert!(rank_one_majorization(&e0, &e1, &LinOperator::zero(&s3), &settings)
            .unwrap()
            .is_true());
        assert_eq!(
            rank_one_majorization(&e0, &e1, &LinOperator::identity(&s3), &settings).unwrap(),
            Implication::Vacuous
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn reflexive_scaling_and_transitive(seed in 0u64..10_000, c in 0.1f64..5.0) {
            let settings = Settings::default();
            let t = random_wce(seed, Profile::Generic);
            let a = t.matrix();
            let r = majorizes(a, a, &settings).unwrap();
            prop_assert!(r.holds);
            let m = r.constant.unwrap();
            prop_assert!(m == 0.0 || (m - 1.0).abs() < 1e-9);

            let space = t.space().clone();
            let b = LinOperator::new(&space, random_matrix(seed + 1, space.dim())).unwrap();
            let s = &b * a;
            let m1 = majorizes(a, &s, &settings).unwrap().constant.unwrap();
            let scaled = majorizes(&a.scale_real(c), &s, &settings).unwrap().constant.unwrap();
            prop_assert!((scaled - m1 / c).abs() <= 1e-8 * (m1 / c).max(1e-300));

            let b2 = LinOperator::new(&space, random_matrix(seed + 2, space.dim())).unwrap();
            let r2 = &b2 * &s;
            let m2 = majorizes(&s, &r2, &settings).unwrap();
            let m13 = majorizes(a, &r2, &settings).unwrap();
            prop_assert!(m13.holds);
            if m2.holds {
                prop_assert!(m13.constant.unwrap() <= m1 * m2.constant.unwrap() * (1.0 + 1e-8) + 1e-12);
            }
        }
    }
}
