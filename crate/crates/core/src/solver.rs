//! Kempf–Ness flow for King's equation.
//!
//! The iterate is a per-vertex invertible `g_v` with metric `h_v = g_v^† g_v`
//! and log-metric `s_v = log h_v`. Every step moves along a one-parameter
//! subgroup, `g ← exp(X/2) g` with `X` Hermitian, which is a geodesic in the
//! space of metrics. In these local coordinates the transformed
//! representation `T' = g T g^{-1}` is kept explicitly, the gradient of the
//! functional is `−μ'` (the standard-metric moment map of `T'`), and its
//! Hessian is `X ↦ Σ w ‖X_t T' − T' X_s‖²`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moment::{functional_at, standard_moment, HermitianMetricFamily, KahlerData};
use crate::numerics::{
    c64, frobenius_sq, re_trace_product, spectral_norm, ComplexMatrix, HermitianMatrix,
    PositiveDefiniteMatrix, C64,
};
use crate::quiver::{Representation, StabilityParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub divergence_norm: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub newton_switch_tol: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iters: 10_000,
            divergence_norm: 50.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            newton_switch_tol: 1e-4,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::validation("tol must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::validation("backtrack must lie in (0, 1)"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::validation("armijo_c must lie in (0, 1)"));
        }
        if !(self.divergence_norm > 0.0) {
            return Err(Error::validation("divergence_norm must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub functional: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct DestabilizerCandidate {
    /// Orthonormal columns spanning the candidate subspace at each vertex.
    pub subspaces: Vec<ComplexMatrix>,
    pub subdims: Vec<usize>,
    /// `Σ_v η_v d'_v`.
    pub slope: f64,
    /// `max_a ‖(Id − Π_{t(a)}) T_a Π_{s(a)}‖`.
    pub defect: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub metric: Option<HermitianMetricFamily>,
    pub history: Vec<ConvergenceRecord>,
    pub final_sup_norm: f64,
    pub final_functional: f64,
    pub iterations: usize,
    /// `s = log h` at the last iterate.
    pub log_metric: Vec<HermitianMatrix>,
    pub certificate: Option<DestabilizerCandidate>,
}

struct Iterate {
    t: Representation,
    g: Vec<ComplexMatrix>,
    g_inv: Vec<ComplexMatrix>,
    log_det: Vec<f64>,
    mu: Vec<HermitianMatrix>,
    sup: f64,
    value: f64,
    scale: f64,
}

impl Iterate {
    fn evaluate(
        t: Representation,
        g: Vec<ComplexMatrix>,
        g_inv: Vec<ComplexMatrix>,
        log_det: Vec<f64>,
        eta: &StabilityParams,
        w: &KahlerData,
    ) -> Result<Self> {
        let mu = standard_moment(&t, eta, w);
        let mut sup: f64 = 0.0;
        for m in &mu {
            if m.dim() > 0 {
                sup = sup.max(m.op_norm()?);
            }
        }
        let value = functional_at(&t, log_det.iter().copied(), eta, w);
        let arrows: f64 = t
            .maps()
            .iter()
            .enumerate()
            .map(|(a, m)| w.weight(a) * frobenius_sq(m))
            .sum();
        let eta_mass: f64 = eta
            .as_slice()
            .iter()
            .zip(t.dims().as_slice())
            .map(|(e, &d)| e.abs() * d as f64)
            .sum();
        Ok(Iterate {
            t,
            g,
            g_inv,
            log_det,
            mu,
            sup,
            value,
            scale: arrows + eta_mass,
        })
    }

    fn step(&self, x: &[HermitianMatrix], len: f64, eta: &StabilityParams, w: &KahlerData) -> Result<Self> {
        let mut e = Vec::with_capacity(x.len());
        let mut e_inv = Vec::with_capacity(x.len());
        let mut log_det = self.log_det.clone();
        for (v, xv) in x.iter().enumerate() {
            let eig = xv.eigh()?;
            e.push(eig.reconstruct(|l| (len * l / 2.0).exp()));
            e_inv.push(eig.reconstruct(|l| (-len * l / 2.0).exp()));
            log_det[v] += len * eig.values.iter().sum::<f64>();
        }
        let t = self.t.transform(&e, &e_inv);
        let g = e.iter().zip(&self.g).map(|(a, b)| a * b).collect();
        let g_inv = self.g_inv.iter().zip(&e_inv).map(|(a, b)| a * b).collect();
        Iterate::evaluate(t, g, g_inv, log_det, eta, w)
    }

    fn log_metric(&self) -> Vec<HermitianMatrix> {
        self.g.iter().zip(&self.g_inv).map(|(g, gi)| log_gram(g, gi)).collect()
    }

    fn log_norm(&self) -> f64 {
        self.g
            .iter()
            .zip(&self.g_inv)
            .map(|(g, gi)| 2.0 * spectral_norm(g).ln().max(spectral_norm(gi).ln()).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// `log(g^† g)` from the right singular vectors of `g`. Each eigenvalue is
/// read from whichever of `g` and `g^{-†}` amplifies the singular vector, so
/// both ends of an ill-conditioned spectrum stay accurate.
fn log_gram(g: &ComplexMatrix, g_inv: &ComplexMatrix) -> HermitianMatrix {
    let n = g.nrows();
    if n == 0 {
        return HermitianMatrix::zeros(0);
    }
    let svd = g.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let v = v_t.adjoint();
    let gi_adj = g_inv.adjoint();
    let mut lambda = Vec::with_capacity(n);
    for i in 0..n {
        let col = v.column(i).into_owned();
        let up = (g * &col).norm();
        lambda.push(if up >= 1.0 {
            2.0 * up.ln()
        } else {
            -2.0 * (&gi_adj * &col).norm().ln()
        });
    }
    let mut scaled = v.clone();
    for (j, l) in lambda.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= *l;
        }
    }
    HermitianMatrix::from_matrix_unchecked(scaled * v.adjoint())
}

/// Orthonormal basis of Hermitian `d x d` matrices for `Re Tr(XY)`.
fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        let mut m = DMatrix::zeros(d, d);
        m[(i, i)] = c64(1.0, 0.0);
        out.push(m);
        for j in i + 1..d {
            let mut s = DMatrix::zeros(d, d);
            s[(i, j)] = c64(r, 0.0);
            s[(j, i)] = c64(r, 0.0);
            out.push(s);
            let mut a = DMatrix::zeros(d, d);
            a[(i, j)] = c64(0.0, r);
            a[(j, i)] = c64(0.0, -r);
            out.push(a);
        }
    }
    out
}

/// Damped Newton direction: `(L + λ) X = μ'`.
fn newton_direction(it: &Iterate, w: &KahlerData, lambda: f64) -> Result<Vec<HermitianMatrix>> {
    let q = it.t.quiver();
    let dims = it.t.dims().as_slice();
    let bases: Vec<Vec<ComplexMatrix>> = dims.iter().map(|&d| hermitian_basis(d)).collect();
    let mut offset = Vec::with_capacity(dims.len());
    let mut p = 0;
    for b in &bases {
        offset.push(p);
        p += b.len();
    }
    let rows: usize = q
        .arrows()
        .iter()
        .map(|a| 2 * dims[a.dst] * dims[a.src])
        .sum();
    let mut jac = DMatrix::<f64>::zeros(rows, p);
    let mut row0 = 0;
    for (a, arrow) in q.arrows().iter().enumerate() {
        let t = it.t.map(a);
        let sw = w.weight(a).sqrt();
        let block = 2 * t.len();
        let mut put = |col: usize, m: ComplexMatrix| {
            for (k, z) in m.iter().enumerate() {
                jac[(row0 + 2 * k, col)] += sw * z.re;
                jac[(row0 + 2 * k + 1, col)] += sw * z.im;
            }
        };
        for (k, e) in bases[arrow.dst].iter().enumerate() {
            put(offset[arrow.dst] + k, e * t);
        }
        for (k, e) in bases[arrow.src].iter().enumerate() {
            put(offset[arrow.src] + k, -(t * e));
        }
        row0 += block;
    }
    let mut lhs = jac.transpose() * &jac;
    for i in 0..p {
        lhs[(i, i)] += lambda;
    }
    let mut rhs = DVector::<f64>::zeros(p);
    for (v, b) in bases.iter().enumerate() {
        for (k, e) in b.iter().enumerate() {
            rhs[offset[v] + k] = re_trace_product(it.mu[v].as_matrix(), e);
        }
    }
    let sol = lhs
        .cholesky()
        .ok_or_else(|| Error::Numeric("Newton system is not positive definite".into()))?
        .solve(&rhs);
    Ok(bases
        .iter()
        .enumerate()
        .map(|(v, b)| {
            let d = dims[v];
            let mut x = DMatrix::<C64>::zeros(d, d);
            for (k, e) in b.iter().enumerate() {
                x += e.scale(sol[offset[v] + k]);
            }
            HermitianMatrix::from_matrix_unchecked(x)
        })
        .collect())
}

/// Minimizes the Kempf–Ness functional over metrics, starting at `h = Id`.
pub fn solve_metric(
    r: &Representation,
    eta: &StabilityParams,
    w: &KahlerData,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    opts.validate()?;
    if eta.len() != r.quiver().num_vertices() || w.weights().len() != r.quiver().num_arrows() {
        return Err(Error::validation("parameters do not match the quiver"));
    }
    let dims = r.dims().as_slice();
    let ident: Vec<ComplexMatrix> = dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
    let mut it = Iterate::evaluate(r.clone(), ident.clone(), ident, vec![0.0; dims.len()], eta, w)?;
    let mut history = vec![ConvergenceRecord {
        iteration: 0,
        functional: it.value,
        residual: it.sup,
    }];
    let mut grad_step: Option<f64> = None;
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;

    for iter in 1..=opts.max_iters + 1 {
        if it.sup <= opts.tol && it.sup <= opts.tol * it.scale.max(f64::MIN_POSITIVE) || it.sup == 0.0 {
            status = SolveStatus::Converged;
            break;
        }
        if it.log_norm() > opts.divergence_norm {
            status = SolveStatus::Diverged;
            break;
        }
        if iter > opts.max_iters {
            break;
        }
        iterations = iter;

        let newton = it.sup < opts.newton_switch_tol;
        let (dir, mut len) = if newton {
            let lambda = (1e-10 * it.scale).max(it.sup);
            (newton_direction(&it, w, lambda)?, 1.0)
        } else {
            let first = 1.0 / it.sup.max(1e-300);
            (it.mu.clone(), grad_step.map_or(first, |s| 2.0 * s))
        };
        // Directional derivative along exp(tX/2) g is −⟨μ', X⟩.
        let slope: f64 = -dir
            .iter()
            .zip(&it.mu)
            .map(|(x, m)| re_trace_product(x.as_matrix(), m.as_matrix()))
            .sum::<f64>();
        if !(slope < 0.0) {
            status = stalled_status(&it);
            break;
        }
        let roundoff = 1e-13 * (it.value.abs() + it.scale);
        let mut accepted = None;
        while len > 1e-18 {
            let cand = it.step(&dir, len, eta, w)?;
            if !cand.value.is_finite() {
                return Err(Error::Solver {
                    iteration: iter,
                    message: "functional became non-finite".into(),
                });
            }
            let armijo = cand.value <= it.value + opts.armijo_c * len * slope;
            let flat = cand.value <= it.value + roundoff && cand.sup < it.sup;
            if armijo || flat {
                accepted = Some(cand);
                break;
            }
            len *= opts.backtrack;
        }
        match accepted {
            Some(next) => {
                debug_assert!(next.value <= it.value + roundoff);
                if !newton {
                    grad_step = Some(len);
                }
                it = next;
                history.push(ConvergenceRecord {
                    iteration: iter,
                    functional: it.value,
                    residual: it.sup,
                });
            }
            None => {
                status = stalled_status(&it);
                break;
            }
        }
    }

    let log_metric = it.log_metric();
    let log_norm = it.log_norm();
    let metric = if status == SolveStatus::Converged {
        let blocks = it
            .g
            .iter()
            .map(|g| PositiveDefiniteMatrix::new(g.adjoint() * g))
            .collect::<Result<Vec<_>>>()?;
        Some(HermitianMetricFamily::new(r.dims(), blocks)?)
    } else {
        None
    };
    let certificate = if status != SolveStatus::Converged && log_norm >= 1.0 {
        Some(extract_destabilizer(std::slice::from_ref(&log_metric), r, eta)?)
    } else {
        None
    };
    Ok(SolveOutcome {
        status: if status == SolveStatus::Diverged && certificate.is_none() {
            SolveStatus::MaxIters
        } else {
            status
        },
        metric,
        history,
        final_sup_norm: it.sup,
        final_functional: it.value,
        iterations,
        log_metric,
        certificate,
    })
}

/// A stalled line search with a residual that is large relative to the
/// problem scale means the functional is sliding off along a ray whose
/// decrease is below resolution; otherwise the iteration ran out of
/// precision near a solution.
fn stalled_status(it: &Iterate) -> SolveStatus {
    if it.sup >= 1e-3 * it.scale {
        SolveStatus::Diverged
    } else {
        SolveStatus::MaxIters
    }
}

const GAP_TIE_TOL: f64 = 1e-9;

/// Spectral subspace of the last trajectory point with `‖s‖ >= 1` below its
/// largest pooled eigenvalue gap.
pub fn extract_destabilizer(
    trajectory: &[Vec<HermitianMatrix>],
    r: &Representation,
    eta: &StabilityParams,
) -> Result<DestabilizerCandidate> {
    let mut chosen = None;
    for s in trajectory.iter().rev() {
        let mut norm: f64 = 0.0;
        for sv in s {
            norm = norm.max(sv.op_norm()?);
        }
        if norm >= 1.0 {
            chosen = Some((s, norm));
            break;
        }
    }
    let (s, norm) = chosen.ok_or_else(|| {
        Error::validation("trajectory has no point with log-metric norm at least 1")
    })?;
    if s.len() != r.quiver().num_vertices() {
        return Err(Error::validation("trajectory does not match the quiver"));
    }

    let eigs = s.iter().map(|sv| sv.eigh()).collect::<Result<Vec<_>>>()?;
    // (normalized eigenvalue, vertex, column)
    let mut pooled: Vec<(f64, usize, usize)> = eigs
        .iter()
        .enumerate()
        .flat_map(|(v, e)| e.values.iter().enumerate().map(move |(k, l)| (l / norm, v, k)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let n = pooled.len();
    let mut cut = n / 2;
    let mut best_gap = 0.0;
    for i in 1..n {
        let gap = pooled[i].0 - pooled[i - 1].0;
        if gap > best_gap + GAP_TIE_TOL {
            best_gap = gap;
            cut = i;
        }
    }
    if best_gap <= GAP_TIE_TOL {
        cut = n / 2;
    }

    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); s.len()];
    for &(_, v, k) in &pooled[..cut] {
        cols[v].push(k);
    }
    let subspaces: Vec<ComplexMatrix> = cols
        .iter()
        .enumerate()
        .map(|(v, ks)| {
            let d = r.dims().get(v);
            let mut m = DMatrix::zeros(d, ks.len());
            for (j, &k) in ks.iter().enumerate() {
                m.set_column(j, &eigs[v].vectors.column(k));
            }
            m
        })
        .collect();
    let subdims: Vec<usize> = cols.iter().map(Vec::len).collect();
    let slope = subdims
        .iter()
        .zip(eta.as_slice())
        .map(|(&d, e)| e * d as f64)
        .sum();
    let proj: Vec<ComplexMatrix> = subspaces.iter().map(|b| b * b.adjoint()).collect();
    let mut defect: f64 = 0.0;
    for (a, arrow) in r.quiver().arrows().iter().enumerate() {
        let d = r.dims().get(arrow.dst);
        let leak = (DMatrix::<C64>::identity(d, d) - &proj[arrow.dst]) * r.map(a) * &proj[arrow.src];
        defect = defect.max(spectral_norm(&leak));
    }
    Ok(DestabilizerCandidate {
        subspaces,
        subdims,
        slope,
        defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::king_residual;
    use crate::numerics::random_complex;
    use crate::quiver::{random_representation, DimensionVector, Quiver};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn one_loop(t: ComplexMatrix) -> Representation {
        let q = Arc::new(Quiver::new(["v"], vec![("a".into(), "v".into(), "v".into())]).unwrap());
        let d = DimensionVector::new(&q, vec![t.nrows()]).unwrap();
        Representation::new(q, d, vec![t]).unwrap()
    }

    fn real(rows: usize, cols: usize, v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_iterator(cols, rows, v.iter().map(|x| c64(*x, 0.0))).transpose()
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        let b = hermitian_basis(3);
        assert_eq!(b.len(), 9);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let ip = re_trace_product(x, y);
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn log_gram_matches_direct_log_when_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_complex(3, 3, &mut rng) + ComplexMatrix::identity(3, 3).scale(2.0);
        let gi = g.clone().try_inverse().unwrap();
        let direct = crate::numerics::hermitian_log(&PositiveDefiniteMatrix::new(g.adjoint() * &g).unwrap()).unwrap();
        let ours = log_gram(&g, &gi);
        assert!(crate::numerics::max_abs(&(direct.as_matrix() - ours.as_matrix())) < 1e-10);
    }

    #[test]
    fn already_solved_instance_converges_at_iteration_zero() {
        let t = real(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let r = one_loop(t);
        let out = solve_metric(&r, &StabilityParams::zeros(1), &KahlerData::uniform(r.quiver()), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert_eq!(out.iterations, 0);
        let h = out.metric.unwrap();
        assert_eq!(h.get(0).as_matrix(), &ComplexMatrix::identity(2, 2));
    }

    #[test]
    fn upper_triangular_converges_to_eigenvalue_norm() {
        let r = one_loop(real(2, 2, &[1.0, 1.0, 0.0, 2.0]));
        let eta = StabilityParams::zeros(1);
        let w = KahlerData::uniform(r.quiver());
        let out = solve_metric(&r, &eta, &w, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!((out.final_functional - 5.0).abs() < 1e-6);
        let res = king_residual(&r, out.metric.as_ref().unwrap(), &eta, &w).unwrap();
        assert!(res.sup_norm < 1e-9);
        for pair in out.history.windows(2) {
            assert!(pair[1].functional <= pair[0].functional + 1e-12);
        }
    }

    #[test]
    fn nilpotent_block_diverges_with_kernel_certificate() {
        let r = one_loop(real(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let out = solve_metric(&r, &StabilityParams::zeros(1), &KahlerData::uniform(r.quiver()), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Diverged);
        assert!(out.final_functional < 1e-6);
        let c = out.certificate.unwrap();
        assert_eq!(c.subdims, vec![1]);
        assert!(c.subspaces[0][(1, 0)].norm() < 1e-3);
        assert!(c.defect < 1e-8);
        assert_eq!(c.slope, 0.0);
    }

    #[test]
    fn planted_destabilizer_is_found() {
        // Vertices 1 -> 2 via a, 2 -> 1 via b; dims (1, 2); the line
        // E'_1 = C, E'_2 = span{e_1} is a subrepresentation of slope c > 0.
        let q = Arc::new(
            Quiver::new(
                ["1", "2"],
                vec![("a".into(), "1".into(), "2".into()), ("b".into(), "2".into(), "1".into())],
            )
            .unwrap(),
        );
        let d = DimensionVector::new(&q, vec![1, 2]).unwrap();
        let ta = ComplexMatrix::from_column_slice(2, 1, &[c64(0.8, 0.3), c64(0.0, 0.0)]);
        let tb = ComplexMatrix::from_row_slice(1, 2, &[c64(-0.4, 1.0), c64(1.2, 0.1)]);
        let r = Representation::new(q.clone(), d, vec![ta, tb]).unwrap();
        let c = 0.5;
        let eta = StabilityParams::new(vec![2.0 * c, -c]).unwrap();
        let out = solve_metric(&r, &eta, &KahlerData::uniform(&q), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Diverged);
        let cert = out.certificate.unwrap();
        assert_eq!(cert.subdims, vec![1, 1]);
        assert!(cert.slope > 0.0);
        assert!(cert.defect < 1e-6, "defect {}", cert.defect);
    }

    #[test]
    fn direct_sum_with_zero_eta_converges() {
        let q = Arc::new(
            Quiver::new(
                ["1", "2"],
                vec![
                    ("x".into(), "1".into(), "1".into()),
                    ("y".into(), "1".into(), "1".into()),
                    ("p".into(), "1".into(), "2".into()),
                    ("m".into(), "2".into(), "1".into()),
                ],
            )
            .unwrap(),
        );
        let r1 = random_representation(&q, &DimensionVector::new(&q, vec![2, 1]).unwrap(), 3);
        let r2 = random_representation(&q, &DimensionVector::new(&q, vec![1, 1]).unwrap(), 4);
        let r = crate::quiver::direct_sum(&r1, &r2).unwrap();
        let eta = StabilityParams::zeros(2);
        let w = KahlerData::uniform(&q);
        let out = solve_metric(&r, &eta, &w, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        let res = king_residual(&r, out.metric.as_ref().unwrap(), &eta, &w).unwrap();
        assert!(res.sup_norm < 1e-9);
        if out.log_metric.iter().any(|s| s.op_norm().unwrap() >= 1.0) {
            let cert = extract_destabilizer(std::slice::from_ref(&out.log_metric), &r, &eta).unwrap();
            assert!(cert.slope <= 0.0);
        }
    }

    #[test]
    fn extract_requires_a_large_point() {
        let r = one_loop(real(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let small = vec![vec![HermitianMatrix::from_real_diagonal(&[0.1, -0.1])]];
        assert!(extract_destabilizer(&small, &r, &StabilityParams::zeros(1)).is_err());
        assert!(extract_destabilizer(&[], &r, &StabilityParams::zeros(1)).is_err());
    }

    #[test]
    fn equal_eigenvalues_split_below_median() {
        let r = one_loop(ComplexMatrix::zeros(2, 2));
        let s = vec![vec![HermitianMatrix::from_real_diagonal(&[3.0, 3.0])]];
        let c = extract_destabilizer(&s, &r, &StabilityParams::zeros(1)).unwrap();
        assert_eq!(c.subdims, vec![1]);
    }

    #[test]
    fn options_are_validated() {
        let bad = SolveOptions { backtrack: 1.5, ..SolveOptions::default() };
        assert!(bad.validate().is_err());
        let bad = SolveOptions { tol: 0.0, ..SolveOptions::default() };
        assert!(bad.validate().is_err());
    }
}
