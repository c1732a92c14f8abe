//! Dense complex linear algebra shared by the solvers.
//!
//! Matrices are `nalgebra` dense matrices over `Complex<f64>`. Hermitian and
//! positive-definite matrices are newtypes whose constructors enforce the
//! invariants once, so downstream code can rely on them.
//!
//! Inner-product convention: `<x, y>_h = y^† h x`, conjugate-linear in the
//! second slot. Every metric-dependent routine in the crate uses it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;

/// Default relative tolerance for Hermitian symmetry checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default relative tolerance for positive-definiteness checks.
pub const POSDEF_TOL: f64 = 1e-12;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITERS: usize = 10_000;

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn ensure_finite(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what}: non-finite entry")))
    }
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius_sq(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, s| acc.max(*s))
}

/// `(m + m^†) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `Re Tr(a b)`, the real inner product used on Hermitian matrices.
pub fn re_trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// i.i.d. standard complex Gaussian entries (real and imaginary parts each
/// with variance 1/2, so `E|z|^2 = 1`).
pub fn random_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c64(re * scale, im * scale)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    HermitianMatrix::from_upper(&random_complex(n, n, rng))
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: DVector<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// `V f(Λ) V^†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

fn eigh_raw(m: &ComplexMatrix) -> Result<Eigh> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigh {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::Numeric("Hermitian eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(k));
    }
    Ok(Eigh { values, vectors })
}

/// A square matrix with `entry(i,j) == conj(entry(j,i))` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    /// Accepts `m` if `max|m - m^†| <= tol * max(1, max|m|)` and stores the
    /// exactly symmetrized matrix.
    pub fn with_tolerance(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::shape(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_finite(&m, "Hermitian matrix")?;
        let defect = max_abs(&(&m - m.adjoint()));
        if defect > tol * max_abs(&m).max(1.0) {
            return Err(Error::validation(format!(
                "matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(HermitianMatrix(hermitian_part(&m)))
    }

    /// Builds the Hermitian matrix whose upper triangle (diagonal real part
    /// included) is taken from `m`.
    pub fn from_upper(m: &ComplexMatrix) -> Self {
        let n = m.nrows();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = c64(m[(i, i)].re, 0.0);
            for j in i + 1..n {
                out[(i, j)] = m[(i, j)];
                out[(j, i)] = m[(i, j)].conj();
            }
        }
        HermitianMatrix(out)
    }

    pub(crate) fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        HermitianMatrix(hermitian_part(&m))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        HermitianMatrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c64(d[i], 0.0)
            } else {
                C64::default()
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn eigh(&self) -> Result<Eigh> {
        eigh_raw(&self.0)
    }

    /// Operator norm, i.e. the largest absolute eigenvalue.
    pub fn op_norm(&self) -> Result<f64> {
        let e = self.eigh()?;
        Ok(e.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())))
    }

    pub fn scale(&self, c: f64) -> Self {
        HermitianMatrix(self.0.scale(c))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }
}

/// A Hermitian matrix with strictly positive spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveDefiniteMatrix(ComplexMatrix);

impl PositiveDefiniteMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL, POSDEF_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, herm_tol: f64, pd_tol: f64) -> Result<Self> {
        let h = HermitianMatrix::with_tolerance(m, herm_tol)?;
        if h.dim() == 0 {
            return Ok(PositiveDefiniteMatrix(h.0));
        }
        let e = h.eigh()?;
        let lo = e.values[0];
        let hi = e.values[e.values.len() - 1].abs();
        if lo <= pd_tol * hi || lo <= 0.0 {
            return Err(Error::Domain(format!(
                "matrix is not positive definite (smallest eigenvalue {lo:.3e})"
            )));
        }
        Ok(PositiveDefiniteMatrix(h.0))
    }

    pub fn identity(n: usize) -> Self {
        PositiveDefiniteMatrix(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_real_diagonal(d).0)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn as_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.clone())
    }

    pub fn inverse(&self) -> ComplexMatrix {
        let n = self.dim();
        match self.0.clone().cholesky() {
            Some(ch) => ch.inverse(),
            // Ill-conditioned but positive: fall back to the spectral inverse.
            None => eigh_raw(&self.0)
                .map(|e| e.reconstruct(|x| 1.0 / x))
                .unwrap_or_else(|_| DMatrix::identity(n, n)),
        }
    }

    /// Solves `self * x = rhs`.
    pub fn solve(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        match self.0.clone().cholesky() {
            Some(ch) => ch.solve(rhs),
            None => self.inverse() * rhs,
        }
    }

    /// Spectral square root, `h^{1/2}`.
    pub fn sqrt(&self) -> Result<ComplexMatrix> {
        Ok(eigh_raw(&self.0)?.reconstruct(f64::sqrt))
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(eigh_raw(&self.0)?.values.iter().map(|v| v.ln()).sum())
    }
}

/// `exp(s)` via the unitary eigendecomposition of `s`.
pub fn hermitian_exp(s: &HermitianMatrix) -> Result<PositiveDefiniteMatrix> {
    ensure_finite(&s.0, "hermitian_exp input")?;
    let e = s.eigh()?;
    if let Some(v) = e.values.iter().find(|v| v.exp() == f64::INFINITY) {
        return Err(Error::Numeric(format!("exp overflow at eigenvalue {v}")));
    }
    // The spectrum is exp(real) > 0, so no relative positivity check applies.
    Ok(PositiveDefiniteMatrix(hermitian_part(&e.reconstruct(f64::exp))))
}

/// Principal logarithm of a positive-definite matrix.
pub fn hermitian_log(h: &PositiveDefiniteMatrix) -> Result<HermitianMatrix> {
    let e = eigh_raw(&h.0)?;
    if let Some(v) = e.values.iter().find(|v| **v <= 0.0) {
        return Err(Error::Domain(format!(
            "logarithm of matrix with non-positive eigenvalue {v:.3e}"
        )));
    }
    Ok(HermitianMatrix(hermitian_part(&e.reconstruct(f64::ln))))
}

/// Adjoint of `t: C^{dim h_src} -> C^{dim h_dst}` with respect to the two
/// metrics: `h_src^{-1} t^† h_dst`. It satisfies
/// `<t x, y>_{h_dst} = <x, t^{†h} y>_{h_src}`.
pub fn metric_adjoint(
    t: &ComplexMatrix,
    h_src: &PositiveDefiniteMatrix,
    h_dst: &PositiveDefiniteMatrix,
) -> Result<ComplexMatrix> {
    if t.ncols() != h_src.dim() || t.nrows() != h_dst.dim() {
        return Err(Error::shape(format!(
            "map of shape {}x{} does not go from dim {} to dim {}",
            t.nrows(),
            t.ncols(),
            h_src.dim(),
            h_dst.dim()
        )));
    }
    Ok(h_src.solve(&(t.adjoint() * h_dst.as_matrix())))
}
