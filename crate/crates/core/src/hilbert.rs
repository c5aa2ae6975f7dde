//! Finite-dimensional weighted L² spaces.
//!
//! A [`MeasureSpace`] is a finite set of atoms with strictly positive
//! weights. Functions are complex vectors indexed by atom and operators are
//! dense complex matrices acting on those vectors. Every metric notion
//! (inner product, adjoint, norm, orthonormality) uses the weighted inner
//! product `<f, g> = sum_i mu_i f_i conj(g_i)`; coordinate matrices are a
//! storage detail.
//!
//! Internally, spectral computations are carried out in the *unitary frame*
//! `f -> D^{1/2} f` (with `D = diag(mu)`), which maps the weighted space
//! isometrically onto `C^n` with the standard inner product. An operator `A`
//! becomes `D^{1/2} A D^{-1/2}` there and the weighted adjoint becomes the
//! conjugate transpose.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::settings::Tolerances;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Finite atomic measure space with strictly positive atom weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpace {
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
}

impl MeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Arc<Self>> {
        if weights.is_empty() {
            return Err(Error::validation("weights", "at least one atom is required"));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::validation(
                format!("weights[{i}]"),
                "weights must be positive",
            ));
        }
        let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();
        Ok(Arc::new(MeasureSpace {
            weights,
            sqrt_weights,
        }))
    }

    /// Probability space with `n` equally weighted atoms.
    pub fn uniform(n: usize) -> Arc<Self> {
        Self::new(vec![1.0 / n as f64; n]).expect("uniform weights are valid")
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub(crate) fn same_space(a: &Arc<MeasureSpace>, b: &Arc<MeasureSpace>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

fn check_space(a: &Arc<MeasureSpace>, b: &Arc<MeasureSpace>, what: &str) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "{what}: operands live on different measure spaces ({} vs {} atoms)",
            a.dim(),
            b.dim()
        )))
    }
}

fn assert_space(a: &Arc<MeasureSpace>, b: &Arc<MeasureSpace>) {
    assert!(same_space(a, b), "operands live on different measure spaces");
}

/// Complex-valued measurable function: one value per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct MFunction {
    space: Arc<MeasureSpace>,
    values: CVector,
}

impl MFunction {
    pub fn new(space: &Arc<MeasureSpace>, values: Vec<C64>) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::usage(format!(
                "function has {} values but the space has {} atoms",
                values.len(),
                space.dim()
            )));
        }
        Ok(MFunction {
            space: Arc::clone(space),
            values: CVector::from_vec(values),
        })
    }

    pub fn from_real(space: &Arc<MeasureSpace>, values: &[f64]) -> Result<Self> {
        Self::new(space, values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub(crate) fn from_vector(space: &Arc<MeasureSpace>, values: CVector) -> Self {
        debug_assert_eq!(values.len(), space.dim());
        MFunction {
            space: Arc::clone(space),
            values,
        }
    }

    pub fn constant(space: &Arc<MeasureSpace>, c: C64) -> Self {
        Self::from_vector(space, CVector::from_element(space.dim(), c))
    }

    pub fn zero(space: &Arc<MeasureSpace>) -> Self {
        Self::constant(space, ZERO)
    }

    pub fn one(space: &Arc<MeasureSpace>) -> Self {
        Self::constant(space, ONE)
    }

    /// Indicator function of a set of atoms.
    pub fn indicator(space: &Arc<MeasureSpace>, atoms: &[usize]) -> Self {
        let mut v = CVector::zeros(space.dim());
        for &i in atoms {
            v[i] = ONE;
        }
        Self::from_vector(space, v)
    }

    /// Coordinate function of atom `i`.
    pub fn basis(space: &Arc<MeasureSpace>, i: usize) -> Self {
        Self::indicator(space, &[i])
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &CVector {
        &self.values
    }

    pub fn get(&self, i: usize) -> C64 {
        self.values[i]
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values
            .iter()
            .zip(self.space.weights())
            .map(|(v, w)| w * v.norm_sqr())
            .sum()
    }

    /// Largest modulus over atoms (the essential supremum on a finite space).
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self::from_vector(&self.space, self.values.map(f))
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_space(&self.space, &other.space);
        Self::from_vector(&self.space, self.values.zip_map(&other.values, f))
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Pointwise squared modulus.
    pub fn abs_sqr(&self) -> Self {
        self.map(|v| C64::new(v.norm_sqr(), 0.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Values mapped into the unitary frame.
    pub(crate) fn to_frame(&self) -> CVector {
        let s = &self.space.sqrt_weights;
        CVector::from_iterator(self.dim(), self.values.iter().zip(s).map(|(v, w)| v * *w))
    }

    pub(crate) fn from_frame(space: &Arc<MeasureSpace>, v: &CVector) -> Self {
        let s = &space.sqrt_weights;
        Self::from_vector(
            space,
            CVector::from_iterator(space.dim(), v.iter().zip(s).map(|(x, w)| x / *w)),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_space(&self.space, &other.space);
        (&self.values - &other.values)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// Weighted inner product `sum_i mu_i f_i conj(g_i)`.
pub fn inner(f: &MFunction, g: &MFunction) -> Result<C64> {
    check_space(&f.space, &g.space, "inner product")?;
    Ok(inner_unchecked(f, g))
}

pub(crate) fn inner_unchecked(f: &MFunction, g: &MFunction) -> C64 {
    f.values
        .iter()
        .zip(g.values.iter())
        .zip(f.space.weights())
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum()
}

/// Dense linear operator on a weighted L² space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOperator {
    space: Arc<MeasureSpace>,
    mat: CMatrix,
}

impl LinOperator {
    pub fn new(space: &Arc<MeasureSpace>, mat: CMatrix) -> Result<Self> {
        let n = space.dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::usage(format!(
                "operator matrix is {}x{} but the space has {n} atoms",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::usage("operator matrix has non-finite entries"));
        }
        Ok(LinOperator {
            space: Arc::clone(space),
            mat,
        })
    }

    pub(crate) fn from_matrix(space: &Arc<MeasureSpace>, mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), space.dim());
        LinOperator {
            space: Arc::clone(space),
            mat,
        }
    }

    pub fn identity(space: &Arc<MeasureSpace>) -> Self {
        let n = space.dim();
        Self::from_matrix(space, CMatrix::identity(n, n))
    }

    pub fn zero(space: &Arc<MeasureSpace>) -> Self {
        let n = space.dim();
        Self::from_matrix(space, CMatrix::zeros(n, n))
    }

    /// Multiplication operator `M_a`.
    pub fn multiplication(a: &MFunction) -> Self {
        Self::from_matrix(&a.space, CMatrix::from_diagonal(&a.values))
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn apply(&self, f: &MFunction) -> MFunction {
        assert_space(&self.space, &f.space);
        MFunction::from_vector(&self.space, &self.mat * &f.values)
    }

    pub fn try_apply(&self, f: &MFunction) -> Result<MFunction> {
        check_space(&self.space, &f.space, "operator application")?;
        Ok(self.apply(f))
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_space(&self.space, &other.space, "composition")?;
        Ok(self * other)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_matrix(&self.space, &self.mat * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// `self^n` by repeated multiplication; `n = 0` gives the identity.
    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::identity(&self.space);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    pub fn adjoint(&self) -> Self {
        adjoint(self)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_space(&self.space, &other.space);
        (&self.mat - &other.mat)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub(crate) fn to_frame(&self) -> CMatrix {
        let s = &self.space.sqrt_weights;
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| self.mat[(i, j)] * (s[i] / s[j]))
    }

    pub(crate) fn from_frame(space: &Arc<MeasureSpace>, m: &CMatrix) -> Self {
        let s = &space.sqrt_weights;
        let n = space.dim();
        Self::from_matrix(space, CMatrix::from_fn(n, n, |i, j| m[(i, j)] * (s[j] / s[i])))
    }
}

impl fmt::Display for LinOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| {
                    let z = self.mat[(i, j)];
                    format!("{:>9.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl<'a> Mul<&'a LinOperator> for &'a LinOperator {
    type Output = LinOperator;
    fn mul(self, rhs: &'a LinOperator) -> LinOperator {
        assert_space(&self.space, &rhs.space);
        LinOperator::from_matrix(&self.space, &self.mat * &rhs.mat)
    }
}

impl<'a> Add<&'a LinOperator> for &'a LinOperator {
    type Output = LinOperator;
    fn add(self, rhs: &'a LinOperator) -> LinOperator {
        assert_space(&self.space, &rhs.space);
        LinOperator::from_matrix(&self.space, &self.mat + &rhs.mat)
    }
}

impl<'a> Sub<&'a LinOperator> for &'a LinOperator {
    type Output = LinOperator;
    fn sub(self, rhs: &'a LinOperator) -> LinOperator {
        assert_space(&self.space, &rhs.space);
        LinOperator::from_matrix(&self.space, &self.mat - &rhs.mat)
    }
}

/// Adjoint with respect to the weighted inner product: `D^{-1} A^H D`.
pub fn adjoint(a: &LinOperator) -> LinOperator {
    let w = a.space.weights();
    let n = a.dim();
    LinOperator::from_matrix(
        &a.space,
        CMatrix::from_fn(n, n, |i, j| a.mat[(j, i)].conj() * (w[j] / w[i])),
    )
}

/// Rank-one operator `h -> <h, g> f`.
pub fn rank_one(f: &MFunction, g: &MFunction) -> Result<LinOperator> {
    check_space(&f.space, &g.space, "rank-one operator")?;
    let w = f.space.weights();
    let n = f.dim();
    Ok(LinOperator::from_matrix(
        &f.space,
        CMatrix::from_fn(n, n, |i, j| f.values[i] * g.values[j].conj() * w[j]),
    ))
}

/// Parameters of the power iteration behind [`op_norm`].
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        let t = Tolerances::default();
        PowerIteration {
            tol: t.iter,
            max_iter: t.max_iter,
            seed: 0,
        }
    }
}

impl PowerIteration {
    pub fn from_tolerances(tol: &Tolerances, seed: u64) -> Self {
        PowerIteration {
            tol: tol.iter,
            max_iter: tol.max_iter,
            seed,
        }
    }
}

const MAX_RESTARTS: u64 = 8;
const MAX_SQUARINGS: usize = 64;

fn random_unit(n: usize, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVector::from_fn(n, |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let nv = v.norm();
    v / C64::new(nv, 0.0)
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration.
///
/// The matrix is first raised to a large power by repeated squaring, which
/// filters the starting vector onto the dominant eigenspace even when the
/// spectral gap is tiny; the plain iteration that follows then only has to
/// confirm convergence. Starting vectors come from the seed sequence
/// `seed, seed + 1, ...`; a start that is (numerically) orthogonal to the
/// dominant eigenspace triggers the next seed.
pub(crate) fn psd_top_eigenvalue(g: &CMatrix, params: &PowerIteration) -> Result<f64> {
    let n = g.nrows();
    let fro = g.norm();
    if fro == 0.0 {
        return Ok(0.0);
    }
    let mut filter = g / C64::new(fro, 0.0);
    for _ in 0..MAX_SQUARINGS {
        let sq = &filter * &filter;
        let s = sq.norm();
        if s == 0.0 || !s.is_finite() {
            break;
        }
        let sq = sq / C64::new(s, 0.0);
        let delta = (&sq - &filter).norm();
        filter = sq;
        if delta <= 1e-14 {
            break;
        }
    }

    let mut best = 0.0f64;
    for restart in 0..MAX_RESTARTS {
        let start = random_unit(n, params.seed.wrapping_add(restart));
        let mut v = &filter * &start;
        let nv = v.norm();
        if !(nv > 1e-8) {
            continue;
        }
        v /= C64::new(nv, 0.0);
        let mut lambda = (v.adjoint() * (g * &v))[(0, 0)].re;
        best = best.max(lambda);
        let mut converged = false;
        for _ in 0..params.max_iter {
            let gv = g * &v;
            let ngv = gv.norm();
            if ngv == 0.0 {
                break;
            }
            v = gv / C64::new(ngv, 0.0);
            let next = (v.adjoint() * (g * &v))[(0, 0)].re;
            best = best.max(next);
            let change = (next - lambda).abs();
            lambda = next;
            if change <= params.tol * lambda.abs() {
                converged = true;
                break;
            }
        }
        if converged {
            return Ok(lambda.max(0.0));
        }
    }
    Err(Error::Numerical {
        what: "power iteration",
        detail: format!("no convergence within {} iterations", params.max_iter),
        best,
    })
}

/// Operator norm (largest singular value) with respect to the weighted
/// inner product, by power iteration on `A* A`.
pub fn op_norm(a: &LinOperator) -> Result<f64> {
    op_norm_with(a, &PowerIteration::default())
}

pub fn op_norm_with(a: &LinOperator, params: &PowerIteration) -> Result<f64> {
    matrix_norm(&a.to_frame(), params)
}

/// Spectral norm of a (possibly rectangular) matrix in standard coordinates.
pub(crate) fn matrix_norm(m: &CMatrix, params: &PowerIteration) -> Result<f64> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let ms = m / C64::new(scale, 0.0);
    let g = ms.adjoint() * &ms;
    match psd_top_eigenvalue(&g, params) {
        Ok(l) => Ok(scale * l.sqrt()),
        Err(Error::Numerical { what, detail, best }) => Err(Error::Numerical {
            what,
            detail,
            best: scale * best.sqrt(),
        }),
        Err(e) => Err(e),
    }
}

/// Singular values in the weighted sense, descending.
pub fn singular_values(a: &LinOperator) -> Vec<f64> {
    singular_values_of(&a.to_frame())
}

/// Singular value decomposition `A = U diag(s) V^H` of a frame matrix.
/// With `full`, `V` is square so its trailing columns span the kernel;
/// otherwise `U` and `V` have `min(rows, cols)` columns.
pub(crate) struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub(crate) fn svd(a: &CMatrix, full: bool) -> Result<Svd> {
    let m = faer::Mat::<C64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let fail = |e: faer::linalg::svd::SvdError| Error::Numerical {
        what: "singular value decomposition",
        detail: format!("{e:?}"),
        best: 0.0,
    };
    let back = |x: faer::MatRef<'_, C64>| CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)]);
    let (u, s, v) = if full {
        let d = m.svd().map_err(fail)?;
        let s = d.S().column_vector().iter().map(|z| z.re).collect();
        (back(d.U()), s, back(d.V()))
    } else {
        let d = m.thin_svd().map_err(fail)?;
        let s = d.S().column_vector().iter().map(|z| z.re).collect();
        (back(d.U()), s, back(d.V()))
    };
    Ok(Svd { u, s, v })
}

fn singular_values_of(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s = svd(a, false).map(|d| d.s).unwrap_or_else(|_| {
        // Fall back to eigenvalues of the Gram matrix.
        let g = a.adjoint() * a;
        g.symmetric_eigenvalues().iter().map(|&x| x.max(0.0).sqrt()).collect()
    });
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Closed subspace given by a basis orthonormal in the weighted inner product.
#[derive(Debug, Clone)]
pub struct Subspace {
    space: Arc<MeasureSpace>,
    /// Orthonormal columns in the unitary frame.
    frame_basis: CMatrix,
}

impl Subspace {
    pub fn empty(space: &Arc<MeasureSpace>) -> Self {
        Subspace {
            space: Arc::clone(space),
            frame_basis: CMatrix::zeros(space.dim(), 0),
        }
    }

    pub fn full(space: &Arc<MeasureSpace>) -> Self {
        let n = space.dim();
        Subspace {
            space: Arc::clone(space),
            frame_basis: CMatrix::identity(n, n),
        }
    }

    /// Orthonormal basis of the span of `vectors`, by Gram-Schmidt with
    /// largest-residual pivoting. Residuals below `tol` times the largest
    /// input norm are treated as dependent.
    pub fn span(space: &Arc<MeasureSpace>, vectors: &[MFunction], tol: f64) -> Result<Self> {
        for v in vectors {
            check_space(space, &v.space, "subspace span")?;
        }
        let cols: Vec<CVector> = vectors.iter().map(|v| v.to_frame()).collect();
        let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let basis = gram_schmidt_pivoted(space.dim(), &[], cols, tol * scale, usize::MAX);
        Ok(Subspace {
            space: Arc::clone(space),
            frame_basis: basis,
        })
    }

    /// Wraps vectors that are already orthonormal, checking orthonormality
    /// to `tol`.
    pub fn from_orthonormal(
        space: &Arc<MeasureSpace>,
        vectors: &[MFunction],
        tol: f64,
    ) -> Result<Self> {
        let n = space.dim();
        let mut m = CMatrix::zeros(n, vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            check_space(space, &v.space, "subspace basis")?;
            m.set_column(j, &v.to_frame());
        }
        let gram = m.adjoint() * &m;
        let k = vectors.len();
        let dev = (gram - CMatrix::identity(k, k))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > tol {
            return Err(Error::usage(format!(
                "basis is not orthonormal (Gram deviation {dev:e})"
            )));
        }
        Ok(Subspace {
            space: Arc::clone(space),
            frame_basis: m,
        })
    }

    pub(crate) fn from_frame_basis(space: &Arc<MeasureSpace>, basis: CMatrix) -> Self {
        Subspace {
            space: Arc::clone(space),
            frame_basis: basis,
        }
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.frame_basis.ncols()
    }

    pub(crate) fn frame_basis(&self) -> &CMatrix {
        &self.frame_basis
    }

    pub fn basis(&self) -> Vec<MFunction> {
        (0..self.dim())
            .map(|j| MFunction::from_frame(&self.space, &self.frame_basis.column(j).into_owned()))
            .collect()
    }

    /// Orthogonal complement, completed from the coordinate vectors with
    /// largest-residual pivoting.
    pub fn complement(&self) -> Subspace {
        let n = self.space.dim();
        let existing: Vec<CVector> = (0..self.dim())
            .map(|j| self.frame_basis.column(j).into_owned())
            .collect();
        let candidates: Vec<CVector> = (0..n)
            .map(|i| {
                let mut e = CVector::zeros(n);
                e[i] = ONE;
                e
            })
            .collect();
        let basis = gram_schmidt_pivoted(n, &existing, candidates, 0.0, n - self.dim());
        Subspace {
            space: Arc::clone(&self.space),
            frame_basis: basis,
        }
    }

    /// Distance of `f` to the subspace.
    pub fn residual(&self, f: &MFunction) -> f64 {
        let v = f.to_frame();
        let coeffs = self.frame_basis.adjoint() * &v;
        (&v - &self.frame_basis * coeffs).norm()
    }

    /// Largest sine of the principal angles between `self` and `other`,
    /// measured from `self`: `||(I - P_other) Q_self||`. Zero exactly when
    /// `self` is contained in `other`.
    pub fn max_sine_to(&self, other: &Subspace) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let q = &self.frame_basis;
        let w = &other.frame_basis;
        let resid = q - w * (w.adjoint() * q);
        singular_values_of(&resid).first().copied().unwrap_or(0.0)
    }

    /// Cosines of the principal angles: singular values of the cross-Gram matrix.
    pub fn principal_cosines(&self, other: &Subspace) -> Vec<f64> {
        if self.dim() == 0 || other.dim() == 0 {
            return Vec::new();
        }
        let g = other.frame_basis.adjoint() * &self.frame_basis;
        singular_values_of(&g)
    }

    pub fn is_contained_in(&self, other: &Subspace, tol: f64) -> bool {
        self.max_sine_to(other) <= tol
    }

    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.is_contained_in(other, tol) && other.is_contained_in(self, tol)
    }
}

/// Modified Gram-Schmidt (two passes) that repeatedly picks the candidate
/// with largest residual against the current basis. Stops at `max_new`
/// accepted vectors or when the best residual drops to `threshold`.
fn gram_schmidt_pivoted(
    n: usize,
    existing: &[CVector],
    mut candidates: Vec<CVector>,
    threshold: f64,
    max_new: usize,
) -> CMatrix {
    let mut basis: Vec<CVector> = existing.to_vec();
    let mut accepted = Vec::new();
    let project_out = |v: &mut CVector, basis: &[CVector]| {
        for _ in 0..2 {
            for b in basis {
                let c = b.dotc(v);
                *v -= b * c;
            }
        }
    };
    for c in candidates.iter_mut() {
        project_out(c, &basis);
    }
    while accepted.len() < max_new && !candidates.is_empty() {
        let (idx, best) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best > threshold) || best == 0.0 {
            break;
        }
        let mut v = candidates.swap_remove(idx);
        project_out(&mut v, &basis);
        let nv = v.norm();
        if nv == 0.0 {
            continue;
        }
        v /= C64::new(nv, 0.0);
        for c in candidates.iter_mut() {
            let coef = v.dotc(c);
            *c -= &v * coef;
        }
        basis.push(v.clone());
        accepted.push(v);
    }
    let mut m = CMatrix::zeros(n, accepted.len());
    for (j, v) in accepted.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Orthonormal basis of `{f : ||A f|| <= tol * ||A|| * ||f||}`.
pub fn kernel(a: &LinOperator) -> Subspace {
    kernel_with(a, Tolerances::default().rank)
}

pub fn kernel_with(a: &LinOperator, tol: f64) -> Subspace {
    let n = a.dim();
    let frame = a.to_frame();
    if frame.iter().all(|z| *z == ZERO) {
        return Subspace::full(&a.space);
    }
    let d = svd(&frame, true).expect("finite matrix");
    let smax = d.s.iter().copied().fold(0.0, f64::max);
    // Columns of V beyond the computed singular values belong to the kernel.
    let null: Vec<usize> = (0..n)
        .filter(|&i| d.s.get(i).is_none_or(|&x| x <= tol * smax))
        .collect();
    let mut basis = CMatrix::zeros(n, null.len());
    for (j, &i) in null.iter().enumerate() {
        basis.set_column(j, &d.v.column(i));
    }
    Subspace::from_frame_basis(&a.space, basis)
}

/// Numerical rank, consistent with [`kernel_with`].
pub fn rank_with(a: &LinOperator, tol: f64) -> usize {
    a.dim() - kernel_with(a, tol).dim()
}

/// Orthogonal projection onto `v`.
pub fn project(v: &Subspace) -> LinOperator {
    let q = &v.frame_basis;
    LinOperator::from_frame(&v.space, &(q * q.adjoint()))
}

/// Spectral decomposition of an operator that is self-adjoint in the
/// weighted inner product: real eigenvalues (ascending) and the unitary-frame
/// eigenvector matrix.
pub(crate) fn self_adjoint_eigen(a: &LinOperator) -> (Vec<f64>, CMatrix) {
    let f = a.to_frame();
    let h = (&f + f.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(f.nrows(), f.ncols());
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Applies a real function to the spectrum of a self-adjoint operator.
pub fn self_adjoint_fn(a: &LinOperator, func: impl Fn(f64) -> f64) -> LinOperator {
    let (vals, vecs) = self_adjoint_eigen(a);
    let d = CVector::from_iterator(vals.len(), vals.iter().map(|&l| C64::new(func(l), 0.0)));
    let m = &vecs * CMatrix::from_diagonal(&d) * vecs.adjoint();
    LinOperator::from_frame(a.space(), &m)
}

/// Positive square root of a positive semidefinite operator. Eigenvalues
/// below `tol` times the largest are treated as zero.
pub fn psd_sqrt(a: &LinOperator, tol: f64) -> LinOperator {
    let (vals, _) = self_adjoint_eigen(a);
    let top = vals.iter().copied().fold(0.0, f64::max);
    self_adjoint_fn(a, |l| if l <= tol * top { 0.0 } else { l.sqrt() })
}

/// Spectral radius from the eigenvalues of a Schur form. Used as an
/// operator-agnostic oracle.
pub fn spectral_radius_dense(a: &LinOperator) -> f64 {
    let schur = a.to_frame().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)].norm()).fold(0.0, f64::max)
}

/// General inverse, as an oracle for closed-form inverses.
pub fn inverse(a: &LinOperator) -> Result<LinOperator> {
    a.mat
        .clone()
        .try_inverse()
        .map(|m| LinOperator::from_matrix(&a.space, m))
        .ok_or_else(|| Error::Numerical {
            what: "matrix inverse",
            detail: "operator is singular".into(),
            best: 0.0,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
        }
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_space(n: usize, seed: u64) -> Arc<MeasureSpace> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        MeasureSpace::new((0..n).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap()
    }

    fn random_fn(space: &Arc<MeasureSpace>, seed: u64) -> MFunction {
        let v = random_unit(space.dim(), seed);
        MFunction::from_vector(space, v * c(3.0))
    }

    fn random_op(space: &Arc<MeasureSpace>, seed: u64) -> LinOperator {
        let n = space.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LinOperator::from_matrix(
            space,
            CMatrix::from_fn(n, n, |_, _| {
                C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            }),
        )
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(MeasureSpace::new(vec![]).is_err());
        let err = MeasureSpace::new(vec![1.0, -0.5]).unwrap_err();
        assert!(err.to_string().contains("weights must be positive"));
        assert!(MeasureSpace::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn inner_examples() {
        let s = MeasureSpace::new(vec![1.0, 1.0]).unwrap();
        let f = MFunction::from_real(&s, &[1.0, 0.0]).unwrap();
        let g = MFunction::from_real(&s, &[0.0, 1.0]).unwrap();
        assert_eq!(inner(&f, &g).unwrap(), ZERO);

        let s = MeasureSpace::uniform(4);
        let one = MFunction::one(&s);
        assert!((inner(&one, &one).unwrap() - ONE).norm() < 1e-15);

        let s = MeasureSpace::new(vec![0.5, 0.5]).unwrap();
        let f = MFunction::from_real(&s, &[1.0, 2.0]).unwrap();
        let g = MFunction::from_real(&s, &[1.0, 1.0]).unwrap();
        assert!((inner(&f, &g).unwrap() - c(1.5)).norm() < 1e-15);
    }

    #[test]
    fn inner_space_mismatch_is_usage_error() {
        let a = MeasureSpace::uniform(2);
        let b = MeasureSpace::uniform(3);
        let err = inner(&MFunction::one(&a), &MFunction::one(&b)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn inner_is_conjugate_symmetric() {
        let s = random_space(5, 1);
        let f = random_fn(&s, 2).map(|z| z * C64::new(0.3, 1.1));
        let g = random_fn(&s, 3);
        let fg = inner(&f, &g).unwrap();
        let gf = inner(&g, &f).unwrap();
        assert!((fg - gf.conj()).norm() < 1e-13);
        assert!(inner(&f, &f).unwrap().re >= 0.0);
    }

    #[test]
    fn op_norm_examples() {
        let s = random_space(6, 4);
        assert!(close(op_norm(&LinOperator::identity(&s)).unwrap(), 1.0, 1e-12));
        let s2 = MeasureSpace::new(vec![1.0, 1.0]).unwrap();
        let d = LinOperator::multiplication(&MFunction::from_real(&s2, &[3.0, 1.0]).unwrap());
        assert!(close(op_norm(&d).unwrap(), 3.0, 1e-12));
        assert_eq!(op_norm(&LinOperator::zero(&s)).unwrap(), 0.0);
    }

    #[test]
    fn rank_one_norm_is_product_of_norms() {
        for seed in 0..20 {
            let s = random_space(2 + (seed as usize % 7), seed);
            let f = random_fn(&s, seed + 100);
            let g = random_fn(&s, seed + 200);
            let r = rank_one(&f, &g).unwrap();
            assert!(close(op_norm(&r).unwrap(), f.norm() * g.norm(), 1e-10));
            // (f ⊗ g) g = ||g||² f
            let rg = r.apply(&g);
            assert!(rg.max_abs_diff(&f.scale(c(g.norm_sqr()))) < 1e-12);
        }
    }

    #[test]
    fn rank_one_kills_orthogonal_vectors() {
        let s = MeasureSpace::new(vec![0.5, 2.0, 1.0]).unwrap();
        let f = MFunction::from_real(&s, &[1.0, 2.0, 3.0]).unwrap();
        let g = MFunction::from_real(&s, &[1.0, 0.0, 0.0]).unwrap();
        let h = MFunction::from_real(&s, &[0.0, 1.0, -4.0]).unwrap();
        let r = rank_one(&f, &g).unwrap();
        assert!(r.apply(&h).sup_norm() < 1e-15);
    }

    #[test]
    fn op_norm_matches_svd_oracle() {
        for seed in 0..40 {
            let s = random_space(1 + (seed as usize % 12), seed);
            let a = random_op(&s, seed + 7);
            let oracle = singular_values(&a)[0];
            assert!(close(op_norm(&a).unwrap(), oracle, 1e-10), "seed {seed}");
        }
    }

    #[test]
    fn op_norm_with_degenerate_top_singular_values() {
        let s = MeasureSpace::uniform(4);
        let d = MFunction::from_real(&s, &[2.0, -2.0, 2.0 - 1e-9, 0.5]).unwrap();
        let a = LinOperator::multiplication(&d);
        assert!(close(op_norm(&a).unwrap(), 2.0, 1e-14));
    }

    #[test]
    fn op_norm_is_reproducible_for_a_seed() {
        let s = random_space(7, 9);
        let a = random_op(&s, 10);
        let p = PowerIteration { seed: 42, ..Default::default() };
        assert_eq!(
            op_norm_with(&a, &p).unwrap().to_bits(),
            op_norm_with(&a, &p).unwrap().to_bits()
        );
    }

    #[test]
    fn adjoint_examples() {
        let s = random_space(5, 11);
        let id = LinOperator::identity(&s);
        assert_eq!(adjoint(&id), id);
        let a = random_op(&s, 12);
        assert!(adjoint(&adjoint(&a)).max_abs_diff(&a) < 1e-13);
        let f = random_fn(&s, 13);
        let g = random_fn(&s, 14);
        let lhs = inner(&a.apply(&f), &g).unwrap();
        let rhs = inner(&f, &adjoint(&a).apply(&g)).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn kernel_examples() {
        let s = random_space(4, 15);
        assert_eq!(kernel(&LinOperator::identity(&s)).dim(), 0);
        assert_eq!(kernel(&LinOperator::zero(&s)).dim(), 4);
        let f = random_fn(&s, 16);
        let g = random_fn(&s, 17);
        let k = kernel(&rank_one(&f, &g).unwrap());
        assert_eq!(k.dim(), 3);
        for h in k.basis() {
            assert!(inner(&h, &g).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn projection_examples() {
        let s = random_space(5, 18);
        assert!(project(&Subspace::full(&s)).max_abs_diff(&LinOperator::identity(&s)) < 1e-14);
        assert_eq!(project(&Subspace::empty(&s)).max_abs(), 0.0);
        let v = Subspace::span(&s, &[random_fn(&s, 19), random_fn(&s, 20)], 1e-10).unwrap();
        let p = project(&v);
        assert!((&p * &p).max_abs_diff(&p) < 1e-10);
        assert!(adjoint(&p).max_abs_diff(&p) < 1e-10);
        for b in v.basis() {
            assert!(p.apply(&b).max_abs_diff(&b) < 1e-10);
        }
    }

    #[test]
    fn complement_is_orthogonal_and_complete() {
        let s = random_space(6, 21);
        let v = Subspace::span(&s, &[random_fn(&s, 22), random_fn(&s, 23)], 1e-10).unwrap();
        let w = v.complement();
        assert_eq!(w.dim(), 4);
        let sum = &project(&v) + &project(&w);
        assert!(sum.max_abs_diff(&LinOperator::identity(&s)) < 1e-12);
    }

    #[test]
    fn span_drops_dependent_vectors() {
        let s = random_space(4, 24);
        let f = random_fn(&s, 25);
        let g = random_fn(&s, 26);
        let h = f.add(&g.scale(c(2.0)));
        let v = Subspace::span(&s, &[f, g, h], 1e-10).unwrap();
        assert_eq!(v.dim(), 2);
    }

    #[test]
    fn containment_by_principal_angles() {
        let s = random_space(5, 27);
        let f = random_fn(&s, 28);
        let g = random_fn(&s, 29);
        let small = Subspace::span(&s, std::slice::from_ref(&f), 1e-10).unwrap();
        let big = Subspace::span(&s, &[f, g.clone()], 1e-10).unwrap();
        assert!(small.is_contained_in(&big, 1e-8));
        assert!(!big.is_contained_in(&small, 1e-8));
        let cos = small.principal_cosines(&big);
        assert!((cos[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let s = random_space(5, 30);
        let a = random_op(&s, 31);
        let g = &adjoint(&a) * &a;
        let r = psd_sqrt(&g, 1e-14);
        assert!((&r * &r).max_abs_diff(&g) < 1e-10 * op_norm(&g).unwrap());
    }

    #[test]
    fn dense_spectral_radius_of_nilpotent_is_zero() {
        let s = MeasureSpace::uniform(3);
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 1)] = c(5.0);
        m[(1, 2)] = c(2.0);
        let a = LinOperator::new(&s, m).unwrap();
        assert!(spectral_radius_dense(&a) < 1e-12);
    }

    #[test]
    fn kernels_of_generated_wce_matrices_match_gram_oracle() {
        use crate::testutil::{random_wce, Profile};
        for seed in 0..3000 {
            let t = random_wce(seed, Profile::Generic);
            let a = t.matrix();
            let frame = a.to_frame();
            let eig = (frame.adjoint() * &frame).symmetric_eigenvalues();
            let top = eig.iter().copied().fold(0.0, f64::max);
            let rank = eig.iter().filter(|&&x| x > 1e-12 * top).count();
            let k = kernel(a);
            assert_eq!(k.dim(), a.dim() - rank, "seed {seed}");
            let norm = op_norm(a).unwrap();
            for h in k.basis() {
                assert!(a.apply(&h).norm() <= 1e-10 * norm.max(1.0), "seed {seed}");
            }
        }
    }
}
