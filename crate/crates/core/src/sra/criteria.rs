//! Whole-algebra questions: `B_T = B(L^2)`, isometry multiples, exact
//! membership through the divergent part of `H_1`, and invariant subspaces
//! in the quasinilpotent case.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hilbert::{adjoint, op_norm_with, rank_one, LinOperator, Subspace};
use crate::settings::Settings;
use crate::sra::blocks::{block_decompose, BlockDecomp};
use crate::sra::membership::{classify_bounded, power_params, Verdict};
use crate::sra::rm::RmFamily;
use crate::wce::{support, WceOp};

/// `s(m) = ||E(|u|^2) v_m||_inf + ||E(|u|^2) v_m / (v_m E(|u|^2) - 1)||_inf (1 + ||E(|u|^2) v_m||_inf)`
/// on the m-grid, restricted to the support of `E(|u|^2)`.
pub fn sup_condition(t: &WceOp, settings: &Settings) -> Vec<(u64, f64)> {
    let family = RmFamily::wce(t);
    let live = support(t.e_u2(), settings.tol.supp);
    settings
        .m_grid()
        .into_iter()
        .map(|m| {
            let v = family.v(m).expect("wce source");
            let (mut a, mut b) = (0.0f64, 0.0f64);
            for i in (0..v.dim()).filter(|&i| live[i]) {
                let uv = t.e_u2().get(i).re * v.get(i).re;
                a = a.max(uv);
                b = b.max((uv / (uv - 1.0)).abs());
            }
            (m, a + b * (1.0 + a))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullAlgebraCheck {
    pub n: usize,
    pub h2_dim: usize,
    /// `dim H_2 ∈ {0, n}`: every operator leaves `N(E M_u)` invariant.
    pub structural: bool,
    /// The divergent part of `H_1` is `{0}` or everything, so no operator
    /// can couple a bounded direction into a divergent one.
    pub exact: bool,
    pub sup_evidence: Vec<(u64, f64)>,
    pub sup_verdict: Verdict,
    /// An operator outside `B_T` when `exact` is false.
    #[serde(skip)]
    pub counterexample: Option<LinOperator>,
}

pub fn bt_equals_full(t: &WceOp, settings: &Settings) -> Result<FullAlgebraCheck> {
    let d = block_decompose(t, &settings.tol)?;
    let n = d.n();
    let k = d.divergent.dim();
    let counterexample = if k > 0 && k < n {
        let rest = d.divergent.complement();
        Some(rank_one(&d.divergent.basis()[0], &rest.basis()[0])?)
    } else {
        None
    };
    let sup_evidence = sup_condition(t, settings);
    Ok(FullAlgebraCheck {
        n,
        h2_dim: d.h2.dim(),
        structural: d.h2.dim() == 0 || d.h2.dim() == n,
        exact: counterexample.is_none(),
        sup_verdict: classify_bounded(&sup_evidence),
        sup_evidence,
        counterexample,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsometryCheck {
    /// `T* T = c I` within `1e-9 ||T||^2`.
    pub holds: bool,
    /// Least-squares `c`.
    pub c: f64,
    pub residual: f64,
    pub sup_evidence: Vec<(u64, f64)>,
    pub sup_verdict: Verdict,
}

pub fn isometry_multiple_check(t: &WceOp, settings: &Settings) -> Result<IsometryCheck> {
    let params = power_params(settings);
    let a = t.matrix();
    let gram = &adjoint(a) * a;
    let n = gram.dim() as f64;
    let c = gram.trace().re / n;
    let id = LinOperator::identity(a.space());
    let residual = op_norm_with(&(&gram - &id.scale_real(c)), &params)?;
    let norm2 = t.norm().powi(2);
    let sup_evidence = sup_condition(t, settings);
    Ok(IsometryCheck {
        holds: residual <= 1e-9 * norm2.max(f64::MIN_POSITIVE),
        c,
        residual,
        sup_verdict: classify_bounded(&sup_evidence),
        sup_evidence,
    })
}

/// Relative leakage `||P_div S P_rest|| / ||S||`.
fn div_leak(d: &BlockDecomp, s: &LinOperator, settings: &Settings) -> Result<f64> {
    let params = power_params(settings);
    let s_norm = op_norm_with(s, &params)?;
    if s_norm == 0.0 {
        return Ok(0.0);
    }
    Ok(op_norm_with(&(&(&d.p_div * s) * &d.p_rest), &params)? / s_norm)
}

/// `S ∈ B_T` iff the orthocomplement of the divergent part of `H_1` is
/// `S`-invariant. On instances where every live block diverges this is the
/// kernel criterion; otherwise the two differ.
pub fn bt_member_divergence_criterion(t: &WceOp, s: &LinOperator, settings: &Settings) -> Result<bool> {
    let d = block_decompose(t, &settings.tol)?;
    Ok(div_leak(&d, s, settings)? <= settings.tol.inv)
}

/// `S ∈ Q_T` iff `S = P_rest S P_div`.
pub fn qt_member_divergence_criterion(t: &WceOp, s: &LinOperator, settings: &Settings) -> Result<bool> {
    let d = block_decompose(t, &settings.tol)?;
    let params = power_params(settings);
    let s_norm = op_norm_with(s, &params)?;
    if s_norm == 0.0 {
        return Ok(true);
    }
    let shaped = &(&d.p_rest * s) * &d.p_div;
    Ok(op_norm_with(&(s - &shaped), &params)? <= settings.tol.inv * s_norm)
}

/// A proper nonzero subspace invariant under every member of `B_T`, when
/// `E(uw) = 0` (up to `tol.peak ||T||`) and `T ≠ 0`: the orthocomplement
/// of the divergent part of `H_1`, which contains `N(E M_u)`.
pub fn nilpotent_invariant_subspace(t: &WceOp, settings: &Settings) -> Result<Option<Subspace>> {
    if t.spectral_radius() > settings.tol.peak * t.norm() {
        return Ok(None);
    }
    let d = block_decompose(t, &settings.tol)?;
    let rest = d.divergent.complement();
    Ok((rest.dim() > 0 && rest.dim() < d.n()).then_some(rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condexp::Partition;
    use crate::hilbert::{MFunction, MeasureSpace};
    use crate::sra::membership::{bt_member_definitional, qt_member};
    use crate::testutil::*;
    use crate::wce::wce_build;

    #[test]
    fn full_algebra_examples() {
        let settings = Settings::default();
        let s = MeasureSpace::new(vec![0.5, 1.0, 2.0]).unwrap();
        let p = Partition::discrete(&s);
        let u = cvec(&s, &[(1.0, 0.0), (0.0, 2.0), (-1.0, 1.0)]);
        let w = u.map(|z| z.conj() / z.norm_sqr());
        let t = wce_build(&p, &u, &w).unwrap();
        let c = bt_equals_full(&t, &settings).unwrap();
        assert!(c.structural && c.exact);

        let t0 = wce_build(&p, &MFunction::zero(&s), &MFunction::one(&s)).unwrap();
        let c = bt_equals_full(&t0, &settings).unwrap();
        assert!(c.structural && c.exact);

        let c = bt_equals_full(&instance_i1(), &settings).unwrap();
        assert!(!c.structural && !c.exact);
        let cx = c.counterexample.unwrap();
        let v = bt_member_definitional(&RmFamily::wce(&instance_i1()), &cx, &settings).unwrap();
        assert_eq!(v.verdict, Verdict::NonMember);
    }

    #[test]
    fn singleton_partition_with_uneven_product_is_not_full() {
        let settings = Settings::default();
        let s = MeasureSpace::uniform(2);
        let p = Partition::discrete(&s);
        let t = wce_build(
            &p,
            &MFunction::one(&s),
            &MFunction::from_real(&s, &[2.0, 1.0]).unwrap(),
        )
        .unwrap();
        let c = bt_equals_full(&t, &settings).unwrap();
        assert!(c.structural);
        assert!(!c.exact);
        let cx = c.counterexample.unwrap();
        let v = bt_member_definitional(&RmFamily::wce(&t), &cx, &settings).unwrap();
        assert_eq!(v.verdict, Verdict::NonMember);
    }

    #[test]
    fn isometry_examples() {
        let settings = Settings::default();
        let s = MeasureSpace::uniform(3);
        let p = Partition::discrete(&s);
        let u = cvec(&s, &[(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)]);
        let t = wce_build(&p, &u, &u).unwrap();
        let c = isometry_multiple_check(&t, &settings).unwrap();
        assert!(c.holds);
        assert!((c.c - 1.0).abs() < 1e-12);

        let one = MFunction::one(&s);
        let e = wce_build(&Partition::trivial(&s), &one, &one).unwrap();
        assert!(!isometry_multiple_check(&e, &settings).unwrap().holds);
        let single = MeasureSpace::uniform(1);
        let one1 = MFunction::one(&single);
        let e1 = wce_build(&Partition::trivial(&single), &one1, &one1).unwrap();
        assert!(isometry_multiple_check(&e1, &settings).unwrap().holds);

        assert!(!isometry_multiple_check(&instance_i2(), &settings).unwrap().holds);
    }

    #[test]
    fn divergence_criterion_matches_definitional_on_non_peak_coupling() {
        // Two singleton blocks, |E(uw)| = 2 and 1: only atom 0 diverges.
        let settings = Settings::default();
        let s = MeasureSpace::uniform(2);
        let p = Partition::discrete(&s);
        let t = wce_build(
            &p,
            &MFunction::one(&s),
            &MFunction::from_real(&s, &[2.0, 1.0]).unwrap(),
        )
        .unwrap();
        let fam = RmFamily::wce(&t);
        let (e0, e1) = (MFunction::basis(&s, 0), MFunction::basis(&s, 1));
        let into_div = rank_one(&e0, &e1).unwrap();
        let out_of_div = rank_one(&e1, &e0).unwrap();
        assert!(!bt_member_divergence_criterion(&t, &into_div, &settings).unwrap());
        assert!(bt_member_divergence_criterion(&t, &out_of_div, &settings).unwrap());
        assert_eq!(
            bt_member_definitional(&fam, &into_div, &settings).unwrap().verdict,
            Verdict::NonMember
        );
        assert_eq!(
            bt_member_definitional(&fam, &out_of_div, &settings).unwrap().verdict,
            Verdict::Member
        );
        assert!(qt_member_divergence_criterion(&t, &out_of_div, &settings).unwrap());
    }

    #[test]
    fn nilpotent_instances_exhibit_an_invariant_subspace() {
        let settings = Settings::default();
        let t = instance_i2();
        let sub = nilpotent_invariant_subspace(&t, &settings).unwrap().unwrap();
        assert!(sub.dim() > 0 && sub.dim() < 4);
        assert!(qt_member(&t, t.matrix(), &settings).unwrap().holds);
        let a = t.partition().lift(&[crate::hilbert::C64::new(2.0, 0.0), crate::hilbert::C64::new(-1.0, 3.0)]);
        for op in [t.matrix().clone(), LinOperator::multiplication(&a)] {
            for h in sub.basis() {
                assert!(sub.residual(&op.apply(&h)) < 1e-10);
            }
        }
        assert!(nilpotent_invariant_subspace(&instance_i1(), &settings).unwrap().is_none());
    }
}
