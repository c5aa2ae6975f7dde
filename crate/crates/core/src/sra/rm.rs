//! The family `R_m = (sum_n d_m^{2n} T*^n T^n)^{1/2}`, `d_m = 1/(1/m + r(T))`.

use crate::error::{Error, Result};
use crate::hilbert::{
    rank_one, self_adjoint_fn, CMatrix, LinOperator, MFunction, C64, ONE,
};
use crate::wce::{support, WceOp};

/// Default cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 1_000_000;
/// Absolute bound on the neglected series tail.
pub const SERIES_TAIL: f64 = 1e-12;

/// Operator whose `R_m` family is being studied.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum RmSource {
    Wce(WceOp),
    /// `x ⊗ y`.
    RankOne { x: MFunction, y: MFunction },
}

/// Closed forms of `d_m`, `v_m`, `q_m`, `lambda_m` and of `R_m^{±1}`.
#[derive(Debug, Clone)]
pub struct RmFamily {
    source: RmSource,
    r: f64,
    supp_tol: f64,
}

impl RmFamily {
    pub fn wce(t: &WceOp) -> Self {
        RmFamily {
            r: t.spectral_radius(),
            source: RmSource::Wce(t.clone()),
            supp_tol: crate::settings::Tolerances::default().supp,
        }
    }

    pub fn rank_one(x: &MFunction, y: &MFunction) -> Result<Self> {
        let r = crate::hilbert::inner(x, y)?.norm();
        Ok(RmFamily {
            r,
            source: RmSource::RankOne {
                x: x.clone(),
                y: y.clone(),
            },
            supp_tol: crate::settings::Tolerances::default().supp,
        })
    }

    pub fn with_support_tolerance(mut self, tol: f64) -> Self {
        self.supp_tol = tol;
        self
    }

    pub fn source(&self) -> &RmSource {
        &self.source
    }

    /// The operator `T` itself.
    pub fn operator(&self) -> LinOperator {
        match &self.source {
            RmSource::Wce(t) => t.matrix().clone(),
            RmSource::RankOne { x, y } => rank_one(x, y).expect("validated at construction"),
        }
    }

    /// Spectral radius `r(T)`.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn d(&self, m: u64) -> f64 {
        assert!(m >= 1, "m starts at 1");
        1.0 / (1.0 / m as f64 + self.r)
    }

    fn wce_op(&self) -> Option<&WceOp> {
        match &self.source {
            RmSource::Wce(t) => Some(t),
            RmSource::RankOne { .. } => None,
        }
    }

    /// `v_m = d_m^2 E(|w|^2) / (1 - d_m^2 |E(uw)|^2)` (WCE sources only).
    pub fn v(&self, m: u64) -> Option<MFunction> {
        let t = self.wce_op()?;
        let d2 = self.d(m).powi(2);
        Some(t.e_w2().zip_map(t.e_uw(), |ew2, euw| {
            C64::new(d2 * ew2.re / (1.0 - d2 * euw.norm_sqr()), 0.0)
        }))
    }

    /// `q_m = 1 + v_m E(|u|^2)`: the eigenvalue of `R_m^2` on `conj(u) chi_B`.
    pub fn q(&self, m: u64) -> Option<MFunction> {
        let t = self.wce_op()?;
        Some(self.v(m)?.zip_map(t.e_u2(), |v, eu2| ONE + v * eu2.re))
    }

    /// `alpha_m = v_m / q_m`, the coefficient that makes
    /// `||R_m^{-1} g||^2 = ||g||^2 - ||alpha_m^{1/2} E(ug)||^2`.
    pub fn alpha(&self, m: u64) -> Option<MFunction> {
        let v = self.v(m)?;
        let q = self.q(m)?;
        Some(v.zip_map(&q, |v, q| v / q))
    }

    /// The printed variant `v_m / (v_m E(|u|^2) - 1)`, kept for auditing.
    pub fn alpha_printed(&self, m: u64) -> Option<MFunction> {
        let t = self.wce_op()?;
        let v = self.v(m)?;
        Some(v.zip_map(t.e_u2(), |v, eu2| v / (v * eu2.re - 1.0)))
    }

    /// Coefficient `kappa_m` in `R_m^2 = I + kappa_m y ⊗ y` (rank-one sources).
    pub fn rank_one_coefficient(&self, m: u64) -> Option<f64> {
        match &self.source {
            RmSource::RankOne { x, .. } => {
                let d2 = self.d(m).powi(2);
                Some(d2 * x.norm_sqr() / (1.0 - d2 * self.r * self.r))
            }
            RmSource::Wce(_) => None,
        }
    }

    /// `lambda_m`, the eigenvalue of `R_m` on `span{y}` (rank-one sources).
    pub fn lambda(&self, m: u64) -> Option<f64> {
        match &self.source {
            RmSource::RankOne { y, .. } => {
                Some((1.0 + self.rank_one_coefficient(m)? * y.norm_sqr()).sqrt())
            }
            RmSource::Wce(_) => None,
        }
    }

    /// Largest eigenvalue of `R_m^2` from the closed form.
    pub fn max_q(&self, m: u64) -> f64 {
        match &self.source {
            RmSource::Wce(t) => {
                let q = self.q(m).expect("wce source");
                let supp = support(t.e_u2(), self.supp_tol);
                q.values()
                    .iter()
                    .zip(supp)
                    .filter(|(_, s)| *s)
                    .map(|(z, _)| z.re)
                    .fold(1.0, f64::max)
            }
            RmSource::RankOne { .. } => self.lambda(m).expect("rank-one source").powi(2),
        }
    }

    /// `I + g(eigenvalue of R_m^2)`-type operators share one shape:
    /// `I + M_{c conj(u)} E M_u` (WCE) or `I + c y ⊗ y` (rank-one), where the
    /// coefficient is chosen so the eigenvalue on the rank part becomes
    /// `f(q)` for the appropriate `q`.
    fn spectral_shape(&self, m: u64, f: impl Fn(f64) -> f64) -> LinOperator {
        match &self.source {
            RmSource::Wce(t) => {
                let q = self.q(m).expect("wce source");
                let supp = support(t.e_u2(), self.supp_tol);
                let c: Vec<C64> = (0..q.dim())
                    .map(|i| {
                        if supp[i] {
                            C64::new((f(q.get(i).re) - 1.0) / t.e_u2().get(i).re, 0.0)
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                let c = MFunction::new(t.space(), c).expect("dimension");
                &LinOperator::identity(t.space()) + &t.scaled_u_gram(&c)
            }
            RmSource::RankOne { y, .. } => {
                let space = y.space();
                let ny2 = y.norm_sqr();
                if ny2 == 0.0 {
                    return LinOperator::identity(space);
                }
                let lam2 = self.lambda(m).expect("rank-one source").powi(2);
                let c = (f(lam2) - 1.0) / ny2;
                &LinOperator::identity(space) + &rank_one(y, y).expect("same space").scale_real(c)
            }
        }
    }

    /// `R_m^2` from the closed form.
    pub fn r_m_squared(&self, m: u64) -> LinOperator {
        self.spectral_shape(m, |q| q)
    }

    /// `R_m`, the positive square root taken on the `H_1 ⊕ H_2` structure.
    pub fn r_m(&self, m: u64) -> LinOperator {
        self.spectral_shape(m, f64::sqrt)
    }

    /// `R_m^{-1}`.
    pub fn r_m_inv(&self, m: u64) -> LinOperator {
        self.spectral_shape(m, |q| 1.0 / q.sqrt())
    }

    /// `R_m^{-2} = I + M_{c' conj(u)} E M_u` with `c' = -v_m / q_m`.
    pub fn r_m_inv_squared(&self, m: u64) -> LinOperator {
        self.spectral_shape(m, |q| 1.0 / q)
    }

    /// `||R_m f||^2 = ||f||^2 + ||v_m^{1/2} E(uf)||^2` (WCE sources).
    pub fn forward_norm_sqr(&self, m: u64, f: &MFunction) -> Option<f64> {
        let t = self.wce_op()?;
        let v = self.v(m)?;
        let euf = t.partition().expect(&t.u().mul(f));
        Some(f.norm_sqr() + weighted_sum(&v, &euf))
    }

    /// `||R_m^{-1} g||^2 = ||g||^2 - ||alpha_m^{1/2} E(ug)||^2` (WCE sources).
    pub fn inverse_norm_sqr(&self, m: u64, g: &MFunction) -> Option<f64> {
        let t = self.wce_op()?;
        let a = self.alpha(m)?;
        let eug = t.partition().expect(&t.u().mul(g));
        Some(g.norm_sqr() - weighted_sum(&a, &eug))
    }
}

/// `sum_i mu_i c_i |h_i|^2` for a real coefficient function `c`.
pub(crate) fn weighted_sum(c: &MFunction, h: &MFunction) -> f64 {
    let w = c.space().weights();
    (0..c.dim())
        .map(|i| w[i] * c.get(i).re * h.get(i).norm_sqr())
        .sum()
}

/// `R_m` from the closed form `(I + M_{v_m conj(u)} E M_u)^{1/2}`.
pub fn rm_closed(t: &WceOp, m: u64) -> LinOperator {
    RmFamily::wce(t).r_m(m)
}

/// `R_m^{-1}` from `R_m^{-2} = I - M_{(v_m/q_m) conj(u)} E M_u`.
pub fn rm_inverse(t: &WceOp, m: u64) -> LinOperator {
    RmFamily::wce(t).r_m_inv(m)
}

/// `R_m` for the rank-one operator `x ⊗ y`.
pub fn rank_one_rm(x: &MFunction, y: &MFunction, m: u64) -> Result<LinOperator> {
    Ok(RmFamily::rank_one(x, y)?.r_m(m))
}

/// `R_m` from the defining series, truncated once a rigorous tail bound
/// falls below [`SERIES_TAIL`], followed by a generic spectral square root.
///
/// With `F_k = ||(d_m T)^k||_F^2` (an upper bound for
/// `d_m^{2k} ||T^k||^2`), submultiplicativity gives
/// `sum_{j>n} d_m^{2j} ||T^j||^2 <= (F_1 + ... + F_n) F_n / (1 - F_n)`
/// whenever `F_n < 1`.
pub fn rm_series(t: &LinOperator, r: f64, m: u64, max_terms: usize) -> Result<LinOperator> {
    Ok(self_adjoint_fn(&rm_series_squared(t, r, m, max_terms)?, |l| {
        l.max(0.0).sqrt()
    }))
}

/// The truncated series `sum_{n=0}^K d_m^{2n} T*^n T^n` itself.
pub fn rm_series_squared(t: &LinOperator, r: f64, m: u64, max_terms: usize) -> Result<LinOperator> {
    assert!(m >= 1, "m starts at 1");
    let d = 1.0 / (1.0 / m as f64 + r);
    let n = t.dim();
    let a = t.to_frame() * C64::new(d, 0.0);
    let mut sum = CMatrix::identity(n, n);
    let mut power = CMatrix::identity(n, n);
    let mut partial = 0.0;
    let mut last_tail = f64::INFINITY;
    for _ in 1..=max_terms {
        power = &a * &power;
        let f = power.norm_squared();
        if !f.is_finite() {
            break;
        }
        sum += power.adjoint() * &power;
        partial += f;
        if f < 1.0 {
            last_tail = partial * f / (1.0 - f);
            if last_tail < SERIES_TAIL {
                return Ok(LinOperator::from_frame(t.space(), &sum));
            }
        }
    }
    Err(Error::Numerical {
        what: "R_m series",
        detail: format!("tail bound not below {SERIES_TAIL:e} within {max_terms} terms"),
        best: last_tail,
    })
}

/// Squared norm through an explicit operator, for cross-checks.
#[cfg(test)]
pub(crate) fn norm_sqr_through(op: &LinOperator, f: &MFunction) -> f64 {
    let g = op.apply(f);
    crate::hilbert::inner_unchecked(&g, &g).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{adjoint, inverse, op_norm, MeasureSpace};
    use crate::testutil::*;
    use crate::condexp::Partition;
    use crate::wce::wce_build;

    const GRID: [u64; 5] = [1, 2, 4, 8, 16];

    #[test]
    fn zero_operator_gives_identity() {
        let s = MeasureSpace::uniform(3);
        let z = LinOperator::zero(&s);
        for m in GRID {
            let r = rm_series(&z, 0.0, m, SERIES_MAX_TERMS).unwrap();
            assert!(r.max_abs_diff(&LinOperator::identity(&s)) < 1e-14);
        }
        let p = Partition::trivial(&s);
        let t = wce_build(&p, &MFunction::one(&s), &MFunction::zero(&s)).unwrap();
        assert!(rm_closed(&t, 7).max_abs_diff(&LinOperator::identity(&s)) < 1e-15);
        assert!(rm_inverse(&t, 7).max_abs_diff(&LinOperator::identity(&s)) < 1e-15);
    }

    #[test]
    fn nilpotent_series_terminates() {
        let t = instance_i2();
        for m in GRID {
            let d = m as f64;
            let expected = &LinOperator::identity(t.space())
                + &(&adjoint(t.matrix()) * t.matrix()).scale_real(d * d);
            let sq = rm_series_squared(t.matrix(), 0.0, m, SERIES_MAX_TERMS).unwrap();
            assert!(sq.max_abs_diff(&expected) < 1e-12 * d * d);
            // v_m = d_m^2 E(|w|^2) when E(uw) = 0.
            let fam = RmFamily::wce(&t);
            let closed = &LinOperator::identity(t.space())
                + &t.scaled_u_gram(&t.e_w2().scale(C64::new(d * d, 0.0)));
            assert!(fam.r_m_squared(m).max_abs_diff(&closed) < 1e-12 * d * d);
        }
    }

    #[test]
    fn scalar_example_m1() {
        // u = w = 1, trivial partition: r = 1, d_1 = 1/2, v_1 = 1/3, q_1 = 4/3.
        let s = MeasureSpace::uniform(4);
        let p = Partition::trivial(&s);
        let one = MFunction::one(&s);
        let t = wce_build(&p, &one, &one).unwrap();
        let fam = RmFamily::wce(&t);
        assert!((fam.d(1) - 0.5).abs() < 1e-15);
        assert!((fam.v(1).unwrap().get(0).re - 1.0 / 3.0).abs() < 1e-15);
        assert!((fam.q(1).unwrap().get(0).re - 4.0 / 3.0).abs() < 1e-15);
        let r1 = rm_closed(&t, 1);
        assert!((op_norm(&r1).unwrap() - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
        // R_1^{-2} has eigenvalue 3/4 on constants.
        let inv2 = fam.r_m_inv_squared(1);
        assert!(inv2.apply(&one).max_abs_diff(&one.scale(C64::new(0.75, 0.0))) < 1e-15);
    }

    #[test]
    fn instance_i1_closed_matches_series() {
        let t = instance_i1();
        for m in [3, 5] {
            let series = rm_series(t.matrix(), t.spectral_radius(), m, SERIES_MAX_TERMS).unwrap();
            assert!(rm_closed(&t, m).max_abs_diff(&series) < 1e-9, "m = {m}");
        }
    }

    #[test]
    fn instance_i1_inverse_matches_generic_inverse() {
        let t = instance_i1();
        let direct = inverse(&rm_closed(&t, 4)).unwrap();
        assert!(rm_inverse(&t, 4).max_abs_diff(&direct) < 1e-9);
    }

    #[test]
    fn closed_forms_on_random_instances() {
        for seed in 0..40 {
            let t = random_wce(seed, Profile::Generic);
            let fam = RmFamily::wce(&t);
            let id = LinOperator::identity(t.space());
            let mut prev_q: Option<MFunction> = None;
            for m in GRID {
                let r = fam.r_m(m);
                let rinv = fam.r_m_inv(m);
                // R_m^2 = I + M_{v conj u} E M_u
                let sq = &id + &t.scaled_u_gram(&fam.v(m).unwrap());
                assert!((&r * &r).max_abs_diff(&sq) < 1e-12 * op_norm(&sq).unwrap());
                assert!(op_norm(&(&(&r * &rinv) - &id)).unwrap() < 1e-9);
                assert!(op_norm(&rinv).unwrap() <= 1.0 + 1e-9);
                // ||R_m||^2 = 1 + ||E(|u|^2) v_m||_inf
                let expected = 1.0 + t.e_u2().mul(&fam.v(m).unwrap()).sup_norm();
                let got = op_norm(&r).unwrap().powi(2);
                assert!((got - expected).abs() < 1e-9 * expected);
                let q = fam.q(m).unwrap();
                for i in 0..q.dim() {
                    assert!(q.get(i).re >= 1.0);
                    if let Some(p) = &prev_q {
                        assert!(q.get(i).re >= p.get(i).re - 1e-12);
                    }
                }
                prev_q = Some(q);
                assert!(fam.d(m) * fam.r() < 1.0);
            }
        }
    }

    #[test]
    fn closed_form_norms_of_vectors() {
        let t = instance_i1();
        let fam = RmFamily::wce(&t);
        let f = cvec(t.space(), &[(1.0, 0.5), (-2.0, 0.0), (0.3, 1.0), (0.0, -1.0)]);
        for m in GRID {
            let fwd = fam.forward_norm_sqr(m, &f).unwrap();
            assert!((fwd - norm_sqr_through(&fam.r_m(m), &f)).abs() < 1e-10 * fwd);
            let inv = fam.inverse_norm_sqr(m, &f).unwrap();
            assert!((inv - norm_sqr_through(&fam.r_m_inv(m), &f)).abs() < 1e-10 * fwd);
        }
    }

    #[test]
    fn rank_one_examples() {
        let s = MeasureSpace::uniform(3);
        let e = |i| MFunction::basis(&s, i).scale(C64::new(3f64.sqrt(), 0.0));
        // <x, y> = 0, ||y|| = 1: R_m^2 = I + m^2 y ⊗ y.
        let (x, y) = (e(0), e(1));
        for m in GRID {
            let fam = RmFamily::rank_one(&x, &y).unwrap();
            assert_eq!(fam.d(m), m as f64);
            let expected = &LinOperator::identity(&s)
                + &rank_one(&y, &y).unwrap().scale_real((m * m) as f64);
            assert!(fam.r_m_squared(m).max_abs_diff(&expected) < 1e-9);
        }
        // x = y unit: lambda_m^2 = 1 + d^2/(1 - d^2).
        let fam = RmFamily::rank_one(&x, &x).unwrap();
        for m in GRID {
            let d = fam.d(m);
            let lam2 = 1.0 + d * d / (1.0 - d * d);
            assert!((fam.lambda(m).unwrap().powi(2) - lam2).abs() < 1e-9 * lam2);
        }
    }

    #[test]
    fn rank_one_closed_matches_series() {
        for seed in 0..30 {
            let (x, y) = random_pair(seed);
            let fam = RmFamily::rank_one(&x, &y).unwrap();
            for m in GRID {
                let series = rm_series(&fam.operator(), fam.r(), m, SERIES_MAX_TERMS).unwrap();
                assert!(fam.r_m(m).max_abs_diff(&series) < 1e-9, "seed {seed} m {m}");
                let prod = &fam.r_m(m) * &fam.r_m_inv(m);
                assert!(prod.max_abs_diff(&LinOperator::identity(x.space())) < 1e-9);
            }
            let lams: Vec<f64> = GRID.iter().map(|&m| fam.lambda(m).unwrap()).collect();
            assert!(lams.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn series_reports_unreachable_tail() {
        let t = instance_i1();
        let err = rm_series(t.matrix(), t.spectral_radius(), 1 << 14, 10).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn printed_inverse_coefficient_differs() {
        let t = instance_i1();
        let fam = RmFamily::wce(&t);
        let a = fam.alpha(2).unwrap();
        let p = fam.alpha_printed(2).unwrap();
        assert!(a.max_abs_diff(&p) > 1e-3);
    }
}
