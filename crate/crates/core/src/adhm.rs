//! ADHM data `(α, β, a, b)` for rank `k` framing and charge `N`, the complex
//! and real moment equations, and a least-squares solver for the deformed
//! system
//!
//! ```text
//! [α, β] + a·b = 0,
//! [α†, α] + [β†, β] + b†b − a a† = η·Id.
//! ```
//!
//! `a : ℂ^k → ℂ^N` is stored as an `N×k` matrix whose columns are the arrows
//! `a_i`, and `b : ℂ^N → ℂ^k` as a `k×N` matrix whose rows are the `b_i`.
//! The real equation is King's equation at vertex `1` of [`build_adhm_quiver`]
//! with parameters `(η, −Nη)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    c64, ensure_finite, frobenius_sq, hermitian_part, random_complex, spectral_norm, trace,
    ComplexMatrix, HermitianMatrix, C64,
};
use crate::quiver::{matrix_from_json, matrix_to_json, DimensionVector, MatrixJson, Quiver, Representation, StabilityParams};
use crate::solver::{ConvergenceRecord, SolveOptions};

/// Two vertices `"1"`, `"2"`; loops `alpha`, `beta` at `1`; `a1..ak : 2 → 1`
/// and `b1..bk : 1 → 2`.
pub fn build_adhm_quiver(k: usize) -> Result<Quiver> {
    if k == 0 {
        return Err(Error::validation("the framing rank k must be at least 1"));
    }
    let mut arrows = vec![
        ("alpha".to_string(), "1".to_string(), "1".to_string()),
        ("beta".to_string(), "1".to_string(), "1".to_string()),
    ];
    arrows.extend((1..=k).map(|i| (format!("a{i}"), "2".to_string(), "1".to_string())));
    arrows.extend((1..=k).map(|i| (format!("b{i}"), "1".to_string(), "2".to_string())));
    Quiver::new(["1", "2"], arrows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ADHMData {
    n: usize,
    k: usize,
    pub alpha: ComplexMatrix,
    pub beta: ComplexMatrix,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
}

impl ADHMData {
    pub fn new(
        alpha: ComplexMatrix,
        beta: ComplexMatrix,
        a: ComplexMatrix,
        b: ComplexMatrix,
    ) -> Result<Self> {
        let n = alpha.nrows();
        let k = a.ncols();
        let shapes = [
            ("alpha", alpha.shape(), (n, n)),
            ("beta", beta.shape(), (n, n)),
            ("a", a.shape(), (n, k)),
            ("b", b.shape(), (k, n)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::validation(format!(
                    "{name} has shape {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        for (name, m) in [("alpha", &alpha), ("beta", &beta), ("a", &a), ("b", &b)] {
            ensure_finite(m, name)?;
        }
        Ok(ADHMData { n, k, alpha, beta, a, b })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        ADHMData {
            n,
            k,
            alpha: DMatrix::zeros(n, n),
            beta: DMatrix::zeros(n, n),
            a: DMatrix::zeros(n, k),
            b: DMatrix::zeros(k, n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(α, β, a, b) ↦ (UαU†, UβU†, Ua, bU†)`.
    pub fn gauge_transform(&self, u: &ComplexMatrix) -> Self {
        let ud = u.adjoint();
        ADHMData {
            n: self.n,
            k: self.k,
            alpha: u * &self.alpha * &ud,
            beta: u * &self.beta * &ud,
            a: u * &self.a,
            b: &self.b * ud,
        }
    }

    /// The representation of the ADHM quiver with dims `(N, 1)` and the King
    /// parameters `(η, −Nη)` that make its vertex-1 residual `μ_R`.
    pub fn to_representation(&self, eta: f64) -> Result<(Representation, StabilityParams)> {
        let q = Arc::new(build_adhm_quiver(self.k)?);
        let dims = DimensionVector::new(&q, vec![self.n, 1])?;
        let mut maps = vec![self.alpha.clone(), self.beta.clone()];
        maps.extend((0..self.k).map(|i| self.a.columns(i, 1).into_owned()));
        maps.extend((0..self.k).map(|i| self.b.rows(i, 1).into_owned()));
        let rep = Representation::new(q, dims, maps)?;
        Ok((rep, StabilityParams::new(vec![eta, -(self.n as f64) * eta])?))
    }
}

#[derive(Debug, Clone)]
pub struct ADHMResiduals {
    pub complex: ComplexMatrix,
    pub real: HermitianMatrix,
    /// Spectral norm of the complex moment.
    pub complex_norm: f64,
    /// Spectral norm of the real moment.
    pub real_norm: f64,
    /// `|Tr μ_R + ηN − (‖b‖² − ‖a‖²)|`.
    pub trace_deviation: f64,
}

impl ADHMResiduals {
    pub fn sup_norm(&self) -> f64 {
        self.complex_norm.max(self.real_norm)
    }
}

fn commutator(x: &ComplexMatrix, y: &ComplexMatrix) -> ComplexMatrix {
    x * y - y * x
}

fn moments(d: &ADHMData, eta: f64) -> (ComplexMatrix, ComplexMatrix) {
    let mu_c = commutator(&d.alpha, &d.beta) + &d.a * &d.b;
    let (ad, bd) = (d.alpha.adjoint(), d.beta.adjoint());
    let mu_r = commutator(&ad, &d.alpha) + commutator(&bd, &d.beta) + d.b.adjoint() * &d.b
        - &d.a * d.a.adjoint()
        - DMatrix::identity(d.n, d.n) * c64(eta, 0.0);
    (mu_c, hermitian_part(&mu_r))
}

pub fn adhm_residuals(d: &ADHMData, eta: f64) -> Result<ADHMResiduals> {
    if !eta.is_finite() {
        return Err(Error::validation("eta must be finite"));
    }
    let (complex, real) = moments(d, eta);
    let lhs = trace(&real).re + eta * d.n as f64;
    let rhs = frobenius_sq(&d.b) - frobenius_sq(&d.a);
    Ok(ADHMResiduals {
        complex_norm: spectral_norm(&complex),
        real_norm: spectral_norm(&real),
        trace_deviation: (lhs - rhs).abs(),
        complex,
        real: HermitianMatrix::new(real)?,
    })
}

// Real coordinates: α, β, a, b, each column-major with (re, im) pairs.

fn pack(d: &ADHMData) -> DVector<f64> {
    let mut x = Vec::with_capacity(2 * (2 * d.n * d.n + 2 * d.n * d.k));
    for m in [&d.alpha, &d.beta, &d.a, &d.b] {
        for z in m.iter() {
            x.push(z.re);
            x.push(z.im);
        }
    }
    DVector::from_vec(x)
}

fn unpack(x: &[f64], n: usize, k: usize) -> ADHMData {
    let mut it = x.chunks_exact(2).map(|p| c64(p[0], p[1]));
    let mut take = |r: usize, c: usize| DMatrix::from_iterator(r, c, it.by_ref().take(r * c));
    let alpha = take(n, n);
    let beta = take(n, n);
    let a = take(n, k);
    let b = take(k, n);
    ADHMData { n, k, alpha, beta, a, b }
}

/// Residual vector whose squared norm is `‖μ_C‖_F² + ‖μ_R‖_F²`.
fn residual_vector(mu_c: &ComplexMatrix, mu_r: &ComplexMatrix) -> DVector<f64> {
    let n = mu_c.nrows();
    let mut r = Vec::with_capacity(3 * n * n);
    for z in mu_c.iter() {
        r.push(z.re);
        r.push(z.im);
    }
    for i in 0..n {
        r.push(mu_r[(i, i)].re);
        for j in i + 1..n {
            r.push(std::f64::consts::SQRT_2 * mu_r[(i, j)].re);
            r.push(std::f64::consts::SQRT_2 * mu_r[(i, j)].im);
        }
    }
    DVector::from_vec(r)
}

fn jacobian(d: &ADHMData) -> DMatrix<f64> {
    let (n, k) = (d.n, d.k);
    let p = 2 * (2 * n * n + 2 * n * k);
    let mut cols = Vec::with_capacity(p);
    let zero = vec![0.0; p];
    for j in 0..p {
        let mut e = zero.clone();
        e[j] = 1.0;
        let t = unpack(&e, n, k);
        let dc = commutator(&t.alpha, &d.beta)
            + commutator(&d.alpha, &t.beta)
            + &t.a * &d.b
            + &d.a * &t.b;
        let sym = |x: &ComplexMatrix, dx: &ComplexMatrix| {
            dx.adjoint() * x + x.adjoint() * dx - dx * x.adjoint() - x * dx.adjoint()
        };
        let dr = sym(&d.alpha, &t.alpha)
            + sym(&d.beta, &t.beta)
            + t.b.adjoint() * &d.b
            + d.b.adjoint() * &t.b
            - &t.a * d.a.adjoint()
            - &d.a * t.a.adjoint();
        cols.push(residual_vector(&dc, &dr));
    }
    DMatrix::from_columns(&cols)
}

#[derive(Debug, Clone)]
pub struct ADHMSolution {
    pub data: ADHMData,
    pub residuals: ADHMResiduals,
    pub iterations: usize,
    /// `functional` is `‖μ_C‖_F² + ‖μ_R‖_F²`, `residual` the larger spectral norm.
    pub history: Vec<ConvergenceRecord>,
}

const GRADIENT_ITERS: usize = 20;

/// Minimizes `½(‖μ_C‖² + ‖μ_R‖²)` from a seeded random start: gradient
/// descent with Armijo backtracking, then damped minimum-norm Gauss–Newton
/// steps `δ = −Jᵀ(JJᵀ + λ)⁻¹ r` once the residual is small or the gradient
/// phase budget is spent.
pub fn solve_adhm(n: usize, k: usize, eta: f64, seed: u64, opts: &SolveOptions) -> Result<ADHMSolution> {
    opts.validate()?;
    if n == 0 || k == 0 {
        return Err(Error::validation("N and k must be at least 1"));
    }
    if eta == 0.0 {
        return Err(Error::Domain(
            "eta = 0 is the undeformed system; solve King's equation on the ADHM quiver with \
             solve_metric and check the stabilizer dimension instead"
                .into(),
        ));
    }
    if !eta.is_finite() {
        return Err(Error::validation("eta must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = eta.abs().sqrt();
    let start = ADHMData {
        n,
        k,
        alpha: random_complex(n, n, &mut rng) * c64(s, 0.0),
        beta: random_complex(n, n, &mut rng) * c64(s, 0.0),
        a: random_complex(n, k, &mut rng) * c64(s, 0.0),
        b: random_complex(k, n, &mut rng) * c64(s, 0.0),
    };
    let mut x = pack(&start);
    let eval = |x: &DVector<f64>| {
        let d = unpack(x.as_slice(), n, k);
        let (c, r) = moments(&d, eta);
        (residual_vector(&c, &r), spectral_norm(&c).max(spectral_norm(&r)), d)
    };
    let (mut r, mut sup, mut data) = eval(&x);
    let mut history = vec![ConvergenceRecord {
        iteration: 0,
        functional: r.norm_squared(),
        residual: sup,
    }];
    let mut step = 1.0 / (1.0 + eta.abs());
    let mut iter = 0;
    while sup > opts.tol {
        if iter >= opts.max_iters {
            return Err(Error::Solver {
                iteration: iter,
                message: format!("no convergence; best residual sup norm {sup:.3e}"),
            });
        }
        iter += 1;
        let j = jacobian(&data);
        let f = r.norm_squared();
        let gradient_phase = iter <= GRADIENT_ITERS && sup > opts.newton_switch_tol * (1.0 + eta.abs());
        let (dir, slope, mut t) = if gradient_phase {
            let g = j.transpose() * &r;
            let gn = g.norm_squared();
            (-g, -gn, step)
        } else {
            let lambda = r.norm().max(1e-14);
            let mut m = &j * j.transpose();
            for i in 0..m.nrows() {
                m[(i, i)] += lambda;
            }
            let y = m
                .cholesky()
                .ok_or_else(|| Error::Numeric("singular normal equations".into()))?
                .solve(&r);
            (-(j.transpose() * y), -f, 1.0)
        };
        let mut accepted = None;
        while t > 1e-14 {
            let trial = &x + &dir * t;
            let (rt, st, dt) = eval(&trial);
            if rt.norm_squared() <= f + 2.0 * opts.armijo_c * t * slope {
                accepted = Some((trial, rt, st, dt));
                break;
            }
            t *= opts.backtrack;
        }
        let Some((xn, rn, sn, dn)) = accepted else {
            return Err(Error::Solver {
                iteration: iter,
                message: format!("line search stalled; best residual sup norm {sup:.3e}"),
            });
        };
        if gradient_phase {
            step = 2.0 * t;
        }
        (x, r, sup, data) = (xn, rn, sn, dn);
        history.push(ConvergenceRecord {
            iteration: iter,
            functional: r.norm_squared(),
            residual: sup,
        });
    }
    let residuals = adhm_residuals(&data, eta)?;
    if residuals.sup_norm() > opts.tol {
        return Err(Error::Consistency(format!(
            "re-evaluated residual {:.3e} exceeds the tolerance",
            residuals.sup_norm()
        )));
    }
    Ok(ADHMSolution {
        data,
        residuals,
        iterations: iter,
        history,
    })
}

/// Real dimension of the stabilizer of `d` in `u(N)`: the nullity of
/// `u ↦ ([u, α], [u, β], u·a, −b·u)`, with singular values below
/// `1e−9·σ_max` counted as zero.
pub fn stabilizer_dimension(d: &ADHMData) -> usize {
    let n = d.n;
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut m = DMatrix::zeros(n, n);
        m[(i, i)] = C64::i();
        basis.push(m);
        for j in i + 1..n {
            let mut re = DMatrix::zeros(n, n);
            re[(i, j)] = c64(1.0, 0.0);
            re[(j, i)] = c64(-1.0, 0.0);
            basis.push(re);
            let mut im = DMatrix::zeros(n, n);
            im[(i, j)] = C64::i();
            im[(j, i)] = C64::i();
            basis.push(im);
        }
    }
    let cols: Vec<DVector<f64>> = basis
        .iter()
        .map(|u| {
            let parts = [
                commutator(u, &d.alpha),
                commutator(u, &d.beta),
                u * &d.a,
                -(&d.b * u),
            ];
            DVector::from_iterator(
                parts.iter().map(|m| 2 * m.len()).sum(),
                parts.iter().flat_map(|m| m.iter().flat_map(|z| [z.re, z.im])),
            )
        })
        .collect();
    let m = DMatrix::from_columns(&cols);
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return n * n;
    }
    let rank = sv.iter().filter(|&&s| s >= 1e-9 * smax).count();
    n * n - rank
}

/// Extra keys (residual reports written by the CLI) are ignored on input.
#[derive(Debug, Serialize, Deserialize)]
struct AdhmJson {
    #[serde(rename = "N")]
    n: usize,
    k: usize,
    eta: f64,
    alpha: MatrixJson,
    beta: MatrixJson,
    a: MatrixJson,
    b: MatrixJson,
}

pub fn adhm_to_json(d: &ADHMData, eta: f64) -> serde_json::Value {
    serde_json::to_value(AdhmJson {
        n: d.n,
        k: d.k,
        eta,
        alpha: matrix_to_json(&d.alpha),
        beta: matrix_to_json(&d.beta),
        a: matrix_to_json(&d.a),
        b: matrix_to_json(&d.b),
    })
    .expect("ADHM data serializes")
}

pub fn parse_adhm(text: &str) -> Result<(ADHMData, f64)> {
    let raw: AdhmJson = serde_json::from_str(text)?;
    let (n, k) = (raw.n, raw.k);
    let d = ADHMData::new(
        matrix_from_json(&raw.alpha, n, n, "alpha")?,
        matrix_from_json(&raw.beta, n, n, "beta")?,
        matrix_from_json(&raw.a, n, k, "a")?,
        matrix_from_json(&raw.b, k, n, "b")?,
    )?;
    Ok((d, raw.eta))
}
