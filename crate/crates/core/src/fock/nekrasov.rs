//! The truncated Nekrasov equation `Σ_i [Z_i†, Z_i] = ħ m Id` for a diagonal
//! metric `⟨z^μ, z^μ⟩ = c_μ` on a monomial truncation.
//!
//! In the orthonormal basis `ê_μ = z^μ / √c_μ` the shift `Z_i` has entries
//! `√(c_{μ+e_i} / c_μ)`, so on the site `μ`
//!
//! ```text
//! r(μ) = Σ_i [ c_{μ+e_i} / c_μ − c_μ / c_{μ−e_i} ] − ħ m,
//! ```
//!
//! the second term being absent when `μ − e_i` leaves the module.

use nalgebra::{DMatrix, DVector};
use num_traits::Num;
use serde::{Deserialize, Serialize};

use super::algebra::MultiIndex;
use super::truncation::{build_truncation, FockTruncation, ModuleKind};
use crate::error::{Error, Result};
use crate::solver::{ConvergenceRecord, SolveOptions};

/// Positive weights `c_μ`, one per basis site.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric(Vec<f64>);

impl DiagonalMetric {
    pub fn new(t: &FockTruncation, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != t.len() {
            return Err(Error::validation(format!(
                "expected {} weights, got {}",
                t.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::validation(format!("weight {w} is not positive")));
        }
        Ok(DiagonalMetric(weights))
    }

    /// `c_μ = ∏ μ_i! ħ^{μ_i}`.
    pub fn fock(t: &FockTruncation, hbar: f64) -> Result<Self> {
        DiagonalMetric::new(t, t.basis().iter().map(|m| fock_weight(m, hbar)).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        DiagonalMetric(self.0.iter().map(|c| c * s).collect())
    }
}

pub fn fock_weight(m: &[u32], hbar: f64) -> f64 {
    m.iter()
        .map(|&k| (1..=k).map(|j| j as f64 * hbar).product::<f64>())
        .product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteResidual<T> {
    pub site: usize,
    pub degree: u32,
    pub value: T,
}

/// Residuals at every site of degree below the cap. Generic so that exact
/// rational weights give exact residuals.
pub fn nekrasov_residual<T: Num + Clone>(
    t: &FockTruncation,
    c: &[T],
    hbar: &T,
    m: u32,
) -> Result<Vec<SiteResidual<T>>> {
    if c.len() != t.len() {
        return Err(Error::validation("weight vector does not match the basis"));
    }
    let mut target = T::zero();
    for _ in 0..m {
        target = target + hbar.clone();
    }
    let mut out = Vec::new();
    for s in 0..t.len() {
        if t.degree(s) >= t.cap() {
            continue;
        }
        let mut r = T::zero();
        for i in 0..t.n() {
            let up = t
                .up(s, i)
                .ok_or_else(|| Error::Internal(format!("site {s} has no upward neighbour {i}")))?;
            r = r + c[up].clone() / c[s].clone();
            if let Some(d) = t.down(s, i) {
                r = r - c[s].clone() / c[d].clone();
            }
        }
        out.push(SiteResidual {
            site: s,
            degree: t.degree(s),
            value: r - target.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResidual {
    pub degree: u32,
    pub max_abs: f64,
}

pub fn residual_profile(residuals: &[SiteResidual<f64>]) -> Vec<LevelResidual> {
    let mut out: Vec<LevelResidual> = Vec::new();
    for r in residuals {
        match out.iter_mut().find(|l| l.degree == r.degree) {
            Some(l) => l.max_abs = l.max_abs.max(r.value.abs()),
            None => out.push(LevelResidual {
                degree: r.degree,
                max_abs: r.value.abs(),
            }),
        }
    }
    out.sort_by_key(|l| l.degree);
    out
}

#[derive(Debug, Clone)]
pub struct NekrasovSolution {
    pub metric: DiagonalMetric,
    pub profile: Vec<LevelResidual>,
    /// `max |r|` over the unfrozen sites.
    pub free_residual: f64,
    pub iterations: usize,
    pub history: Vec<ConvergenceRecord>,
}

/// Newton iteration in `x = log c`. Sites of degree `≥ D − buffer` are held
/// at Fock values; the remaining sites are the unknowns, and their residuals
/// the equations. Steps solve `(JᵀJ + λ) δ = −Jᵀ r` with
/// `λ = max(1e−12, ‖r‖)`, followed by backtracking on `‖r‖`.
pub fn solve_nekrasov(
    t: &FockTruncation,
    hbar: f64,
    m: u32,
    buffer: u32,
    opts: &SolveOptions,
) -> Result<NekrasovSolution> {
    opts.validate()?;
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::validation("hbar must be positive"));
    }
    if m == 0 {
        return Err(Error::validation("m must be at least 1"));
    }
    let free_top = t.cap().checked_sub(buffer + 1).filter(|&top| top >= t.min_degree()).ok_or_else(|| {
        Error::validation(format!(
            "buffer {buffer} leaves no free sites below the degree cap {}",
            t.cap()
        ))
    })?;
    let free: Vec<usize> = (0..t.len()).filter(|&s| t.degree(s) <= free_top).collect();
    let mut col = vec![None; t.len()];
    for (j, &s) in free.iter().enumerate() {
        col[s] = Some(j);
    }
    let mut logc: Vec<f64> = t.basis().iter().map(|mu| fock_weight(mu, hbar).ln()).collect();

    let eval = |logc: &[f64]| -> Result<DVector<f64>> {
        let c: Vec<f64> = logc.iter().map(|x| x.exp()).collect();
        let res = nekrasov_residual(t, &c, &hbar, m)?;
        Ok(DVector::from_iterator(
            free.len(),
            res.iter().filter(|r| col[r.site].is_some()).map(|r| r.value),
        ))
    };
    let jacobian = |logc: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(free.len(), free.len());
        for (row, &s) in free.iter().enumerate() {
            for i in 0..t.n() {
                let u = t.up(s, i).expect("free sites lie below the cap");
                let e = (logc[u] - logc[s]).exp();
                if let Some(cu) = col[u] {
                    j[(row, cu)] += e;
                }
                j[(row, row)] -= e;
                if let Some(d) = t.down(s, i) {
                    let e = (logc[s] - logc[d]).exp();
                    j[(row, row)] -= e;
                    if let Some(cd) = col[d] {
                        j[(row, cd)] += e;
                    }
                }
            }
        }
        j
    };

    let mut r = eval(&logc)?;
    let mut history = vec![ConvergenceRecord {
        iteration: 0,
        functional: r.norm_squared(),
        residual: r.amax(),
    }];
    let mut iter = 0;
    while r.amax() > opts.tol {
        if iter >= opts.max_iters {
            return Err(Error::Solver {
                iteration: iter,
                message: format!("no convergence; free residual {:.3e}", r.amax()),
            });
        }
        iter += 1;
        let j = jacobian(&logc);
        let jt = j.transpose();
        let lambda = r.norm().max(1e-12);
        let mut a = &jt * &j;
        for k in 0..a.nrows() {
            a[(k, k)] += lambda;
        }
        let delta = -a
            .cholesky()
            .ok_or_else(|| Error::Numeric("normal equations are not positive definite".into()))?
            .solve(&(&jt * &r));
        let norm0 = r.norm();
        let mut step = 1.0;
        let accepted = loop {
            let mut trial = logc.clone();
            for (k, &s) in free.iter().enumerate() {
                trial[s] += step * delta[k];
            }
            let rt = eval(&trial)?;
            if rt.norm() <= (1.0 - opts.armijo_c * step) * norm0 {
                break Some((trial, rt));
            }
            step *= opts.backtrack;
            if step < 1e-12 {
                break None;
            }
        };
        let Some((trial, rt)) = accepted else {
            return Err(Error::Solver {
                iteration: iter,
                message: format!("line search stalled; free residual {:.3e}", r.amax()),
            });
        };
        logc = trial;
        r = rt;
        history.push(ConvergenceRecord {
            iteration: iter,
            functional: r.norm_squared(),
            residual: r.amax(),
        });
    }
    let metric = DiagonalMetric::new(t, logc.iter().map(|x| x.exp()).collect())?;
    let profile = residual_profile(&nekrasov_residual(t, metric.weights(), &hbar, m)?);
    Ok(NekrasovSolution {
        metric,
        profile,
        free_residual: r.amax(),
        iterations: iter,
        history,
    })
}

fn shift_matrices(t: &FockTruncation, c: &DiagonalMetric) -> Vec<DMatrix<f64>> {
    let w = c.weights();
    (0..t.n())
        .map(|i| {
            let mut z = DMatrix::zeros(t.len(), t.len());
            for s in 0..t.len() {
                if let Some(u) = t.up(s, i) {
                    z[(u, s)] = (w[u] / w[s]).sqrt();
                }
            }
            z
        })
        .collect()
}

/// Largest operator norm of `[Z_i†, Z_j] − ħ δ_ij` restricted to each graded
/// level below the cap, maximized over `(i, j)`.
pub fn commutator_diagnostics(t: &FockTruncation, c: &DiagonalMetric, hbar: f64) -> Result<Vec<LevelResidual>> {
    if c.weights().len() != t.len() {
        return Err(Error::validation("weight vector does not match the basis"));
    }
    let z = shift_matrices(t, c);
    let mut comm = Vec::new();
    for i in 0..t.n() {
        for j in 0..t.n() {
            let mut m = z[i].transpose() * &z[j] - &z[j] * z[i].transpose();
            if i == j {
                for k in 0..t.len() {
                    m[(k, k)] -= hbar;
                }
            }
            comm.push(m);
        }
    }
    let mut out = Vec::new();
    for level in t.min_degree()..t.cap() {
        let sites: Vec<usize> = t.level(level).collect();
        let worst = comm
            .iter()
            .map(|m| m.select_rows(&sites).select_columns(&sites).singular_values().max())
            .fold(0.0, f64::max);
        out.push(LevelResidual {
            degree: level,
            max_abs: worst,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ModuleJson {
    Name(String),
    Ideal { ideal: Vec<MultiIndex> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemJson {
    n: usize,
    module: ModuleJson,
    #[serde(rename = "D")]
    cap: u32,
    hbar: f64,
    #[serde(default)]
    m: Option<u32>,
    #[serde(default)]
    buffer: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct NekrasovProblem {
    pub truncation: FockTruncation,
    pub hbar: f64,
    pub m: u32,
    pub buffer: u32,
}

pub const DEFAULT_BUFFER: u32 = 2;

pub fn parse_nekrasov_problem(text: &str) -> Result<NekrasovProblem> {
    let raw: ProblemJson = serde_json::from_str(text)?;
    let kind = match raw.module {
        ModuleJson::Name(s) if s == "full" => ModuleKind::Full,
        ModuleJson::Name(s) => {
            return Err(Error::validation(format!("unknown module {s:?}; expected \"full\" or an ideal")))
        }
        ModuleJson::Ideal { ideal } => ModuleKind::Ideal(ideal),
    };
    Ok(NekrasovProblem {
        truncation: build_truncation(raw.n, kind, raw.cap)?,
        hbar: raw.hbar,
        m: raw.m.unwrap_or(raw.n as u32),
        buffer: raw.buffer.unwrap_or(DEFAULT_BUFFER),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightJson {
    pub monomial: MultiIndex,
    pub c: f64,
}

pub fn weights_json(t: &FockTruncation, c: &DiagonalMetric) -> Vec<WeightJson> {
    t.basis()
        .iter()
        .zip(c.weights())
        .map(|(m, &c)| WeightJson {
            monomial: m.clone(),
            c,
        })
        .collect()
}
