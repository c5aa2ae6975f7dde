//! Weighted conditional expectation operators `T = M_w E M_u`.

use std::sync::Arc;

use crate::condexp::{cond_expect, Partition};
use crate::error::{Error, Result};
use crate::hilbert::{
    CMatrix, CVector, LinOperator, MFunction, MeasureSpace, C64, ZERO,
};

/// `f -> w E(u f)` together with its cached A-measurable data.
#[derive(Debug, Clone)]
pub struct WceOp {
    partition: Partition,
    u: MFunction,
    w: MFunction,
    matrix: LinOperator,
    e_u2: MFunction,
    e_w2: MFunction,
    e_uw: MFunction,
}

pub fn wce_build(partition: &Partition, u: &MFunction, w: &MFunction) -> Result<WceOp> {
    let space = partition.space();
    for (name, f) in [("u", u), ("w", w)] {
        if f.space().weights() != space.weights() {
            return Err(Error::usage(format!("{name} lives on a different space than the partition")));
        }
    }
    let e = cond_expect(partition);
    let matrix = &(&LinOperator::multiplication(w) * &e) * &LinOperator::multiplication(u);
    Ok(WceOp {
        e_u2: partition.expect(&u.abs_sqr()),
        e_w2: partition.expect(&w.abs_sqr()),
        e_uw: partition.expect(&u.mul(w)),
        partition: partition.clone(),
        u: u.clone(),
        w: w.clone(),
        matrix,
    })
}

/// Support `{x : |f(x)| > tol * max|f|}`.
pub fn support(f: &MFunction, tol: f64) -> Vec<bool> {
    let scale = f.sup_norm();
    f.values().iter().map(|v| scale > 0.0 && v.norm() > tol * scale).collect()
}

impl WceOp {
    pub fn space(&self) -> &Arc<MeasureSpace> {
        self.partition.space()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn u(&self) -> &MFunction {
        &self.u
    }

    pub fn w(&self) -> &MFunction {
        &self.w
    }

    pub fn matrix(&self) -> &LinOperator {
        &self.matrix
    }

    /// `E(|u|^2)`.
    pub fn e_u2(&self) -> &MFunction {
        &self.e_u2
    }

    /// `E(|w|^2)`.
    pub fn e_w2(&self) -> &MFunction {
        &self.e_w2
    }

    /// `E(uw)`.
    pub fn e_uw(&self) -> &MFunction {
        &self.e_uw
    }

    /// `E M_u`.
    pub fn e_mu(&self) -> LinOperator {
        &cond_expect(&self.partition) * &LinOperator::multiplication(&self.u)
    }

    /// `M_{conj u} E M_u`, the positive operator underlying every `R_m`.
    pub fn u_gram(&self) -> LinOperator {
        &LinOperator::multiplication(&self.u.conj()) * &self.e_mu()
    }

    /// `M_{a conj(u)} E M_u` for an A-measurable `a`.
    pub fn scaled_u_gram(&self, a: &MFunction) -> LinOperator {
        &LinOperator::multiplication(&a.mul(&self.u.conj())) * &self.e_mu()
    }

    /// Norm from the boundedness criterion:
    /// `|| E(|w|^2)^{1/2} E(|u|^2)^{1/2} ||_inf`.
    pub fn norm(&self) -> f64 {
        self.e_w2
            .values()
            .iter()
            .zip(self.e_u2.values().iter())
            .map(|(a, b)| (a.re * b.re).max(0.0).sqrt())
            .fold(0.0, f64::max)
    }

    /// `T^n f = E(uw)^{n-1} w E(uf)`; `n = 0` gives the identity.
    pub fn power(&self, n: u32) -> LinOperator {
        if n == 0 {
            return LinOperator::identity(self.space());
        }
        let weight = self.e_uw.map(|z| z.powu(n - 1)).mul(&self.w);
        &LinOperator::multiplication(&weight) * &self.e_mu()
    }

    /// `T*^n f = conj(E(uw))^{n-1} conj(u) E(conj(w) f)`.
    pub fn adjoint_power(&self, n: u32) -> LinOperator {
        if n == 0 {
            return LinOperator::identity(self.space());
        }
        let weight = self.e_uw.map(|z| z.conj().powu(n - 1)).mul(&self.u.conj());
        let e = cond_expect(&self.partition);
        &(&LinOperator::multiplication(&weight) * &e) * &LinOperator::multiplication(&self.w.conj())
    }

    /// `M_{conj u} E M_{conj w}`, the adjoint written as a WCE operator.
    pub fn adjoint_wce(&self) -> WceOp {
        wce_build(&self.partition, &self.w.conj(), &self.u.conj()).expect("same space")
    }

    /// `r(T) = ||E(uw)||_inf`.
    pub fn spectral_radius(&self) -> f64 {
        self.e_uw.sup_norm()
    }

    /// `||T^k||^{1/k}` from the closed-form norm of the WCE operator with
    /// weight `E(uw)^{k-1} w`, evaluated in log space.
    pub fn gelfand_estimate(&self, k: u32) -> f64 {
        assert!(k >= 1);
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.space().dim() {
            let a = self.e_w2.get(i).re * self.e_u2.get(i).re;
            let r = self.e_uw.get(i).norm();
            if a <= 0.0 || (k > 1 && r == 0.0) {
                continue;
            }
            let log = (k - 1) as f64 * r.ln() + 0.5 * a.ln();
            best = best.max(log);
        }
        if best == f64::NEG_INFINITY {
            0.0
        } else {
            (best / k as f64).exp()
        }
    }

    /// Atoms where `|E(uw)|` attains the spectral radius (relative tolerance).
    /// Every atom is a peak atom when `r <= tol ||T||`, i.e. when the
    /// spectral radius is zero up to rounding.
    pub fn peak_atoms(&self, tol: f64) -> Vec<usize> {
        let r = self.spectral_radius();
        if r <= tol * self.norm() {
            return (0..self.space().dim()).collect();
        }
        (0..self.space().dim())
            .filter(|&i| (r - self.e_uw.get(i).norm()) <= tol * r)
            .collect()
    }

    /// Aluthge weight `w~ = chi_{z1} E(uw) conj(u) / E(|u|^2)` with
    /// `z1 = supp E(|u|^2)`; the quotient is zero off `z1`.
    pub fn aluthge_weight(&self, supp_tol: f64) -> MFunction {
        let z1 = support(&self.e_u2, supp_tol);
        let vals: Vec<C64> = (0..self.space().dim())
            .map(|i| {
                if z1[i] {
                    self.e_uw.get(i) * self.u.get(i).conj() / self.e_u2.get(i).re
                } else {
                    ZERO
                }
            })
            .collect();
        MFunction::new(self.space(), vals).expect("dimension matches")
    }

    /// The Aluthge transform as the WCE operator `M_{w~} E M_u`.
    pub fn aluthge_op(&self, supp_tol: f64) -> WceOp {
        wce_build(&self.partition, &self.u, &self.aluthge_weight(supp_tol)).expect("same space")
    }

    /// Closed-form Aluthge transform.
    pub fn aluthge(&self, supp_tol: f64) -> LinOperator {
        self.aluthge_op(supp_tol).matrix
    }
}

/// Polar decomposition `T = U |T|`.
#[derive(Debug, Clone)]
pub struct PolarParts {
    /// Partial isometry with kernel equal to that of `|T|`.
    pub u: LinOperator,
    /// `|T| = (T*T)^{1/2}`.
    pub abs: LinOperator,
    /// `|T|^{1/2}`.
    pub abs_sqrt: LinOperator,
}

impl PolarParts {
    /// `|T|^{1/2} U |T|^{1/2}`.
    pub fn aluthge(&self) -> LinOperator {
        &(&self.abs_sqrt * &self.u) * &self.abs_sqrt
    }
}

/// Polar decomposition from the spectral decomposition of `T*T`, obtained
/// through a singular value decomposition in the unitary frame. Singular
/// values at or below `tol` times the largest are treated as zero, so `U`
/// vanishes exactly on the numerical kernel of `|T|`.
pub fn polar(t: &LinOperator, tol: f64) -> Result<PolarParts> {
    let space = t.space();
    let n = t.dim();
    let frame = t.to_frame();
    let d = crate::hilbert::svd(&frame, false)?;
    let left = d.u;
    let v_t = d.v.adjoint();
    let sigma = &d.s;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let kept: Vec<bool> = sigma.iter().map(|&s| smax > 0.0 && s > tol * smax).collect();

    let diag = |f: &dyn Fn(f64) -> f64| {
        CVector::from_iterator(
            sigma.len(),
            sigma
                .iter()
                .zip(&kept)
                .map(|(&s, &k)| C64::new(if k { f(s) } else { 0.0 }, 0.0)),
        )
    };
    let v = &d.v;
    let abs = v * CMatrix::from_diagonal(&diag(&|s| s)) * &v_t;
    let abs_sqrt = v * CMatrix::from_diagonal(&diag(&|s| s.sqrt())) * &v_t;
    let ones = diag(&|_| 1.0);
    let u = &left * CMatrix::from_diagonal(&ones) * &v_t;
    debug_assert_eq!(u.nrows(), n);
    Ok(PolarParts {
        u: LinOperator::from_frame(space, &u),
        abs: LinOperator::from_frame(space, &abs),
        abs_sqrt: LinOperator::from_frame(space, &abs_sqrt),
    })
}
