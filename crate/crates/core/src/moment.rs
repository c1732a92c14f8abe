//! King's residual, the Kempf–Ness functional and the Hamiltonians of the
//! gauge action on quiver representations.
//!
//! Conventions used throughout:
//!
//! * `μ_v = Σ_{s(a)=v} w_a T_a^{†h} T_a − Σ_{t(a)=v} w_a T_a T_a^{†h} − η_v Id`.
//! * The Kempf–Ness functional is
//!   `D(s) = Σ_a w_a Tr(T_a^{†h} T_a) + Σ_v η_v log det h_v` with `h = exp(s)`,
//!   so that its critical points are exactly the zeros of `μ`.
//! * Endomorphisms act on the right in the path algebra, so the algebra
//!   product `u·v` of gauge elements is the matrix product `v u`, and the
//!   bracket `[u, A]` on an arrow is `T_a u_{s(a)} − u_{t(a)} T_a`.
//! * The cyclic functional is `η(π_v) = √−1 η_v` and the Kähler pairing is
//!   `ω₀(X, Ȳ) = Σ_a w_a Tr(X_a Y_a^†)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{
    c64, hermitian_exp, metric_adjoint, ComplexMatrix, HermitianMatrix, PositiveDefiniteMatrix, C64,
};
use crate::quiver::{DimensionVector, Quiver, Representation, StabilityParams};

/// Per-vertex positive-definite metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMetricFamily(Vec<PositiveDefiniteMatrix>);

impl HermitianMetricFamily {
    pub fn new(dims: &DimensionVector, blocks: Vec<PositiveDefiniteMatrix>) -> Result<Self> {
        if blocks.len() != dims.as_slice().len() {
            return Err(Error::validation("metric family does not match the vertex count"));
        }
        for (v, (h, &d)) in blocks.iter().zip(dims.as_slice()).enumerate() {
            if h.dim() != d {
                return Err(Error::validation(format!(
                    "metric block {v} has dimension {}, expected {d}",
                    h.dim()
                )));
            }
        }
        Ok(HermitianMetricFamily(blocks))
    }

    pub fn identity(dims: &DimensionVector) -> Self {
        HermitianMetricFamily(
            dims.as_slice()
                .iter()
                .map(|&d| PositiveDefiniteMatrix::identity(d))
                .collect(),
        )
    }

    /// `h_v = exp(s_v)`.
    pub fn from_log(s: &[HermitianMatrix]) -> Result<Self> {
        Ok(HermitianMetricFamily(
            s.iter().map(hermitian_exp).collect::<Result<_>>()?,
        ))
    }

    pub fn blocks(&self) -> &[PositiveDefiniteMatrix] {
        &self.0
    }

    pub fn get(&self, v: usize) -> &PositiveDefiniteMatrix {
        &self.0[v]
    }
}

/// Positive arrow weights of the Kähler form.
#[derive(Debug, Clone, PartialEq)]
pub struct KahlerData {
    weights: Vec<f64>,
}

impl KahlerData {
    pub fn new(q: &Quiver, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != q.num_arrows() {
            return Err(Error::validation(format!(
                "{} weights for {} arrows",
                weights.len(),
                q.num_arrows()
            )));
        }
        if let Some((a, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::validation(format!(
                "weight of arrow \"{}\" must be positive, got {w}",
                q.arrows()[a].id
            )));
        }
        Ok(KahlerData { weights })
    }

    pub fn uniform(q: &Quiver) -> Self {
        KahlerData {
            weights: vec![1.0; q.num_arrows()],
        }
    }

    pub fn weight(&self, a: usize) -> f64 {
        self.weights[a]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scale(&self, c: f64) -> Self {
        KahlerData {
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MomentResidual {
    pub blocks: Vec<ComplexMatrix>,
    /// Largest spectral radius over vertices (the blocks are
    /// `h`-self-adjoint, so their spectra are real).
    pub sup_norm: f64,
    /// `Σ_v Re Tr μ_v`.
    pub trace_sum: f64,
}

/// Gauge Lie algebra element: `u_v^{†h} = −u_v` at every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeElement(Vec<ComplexMatrix>);

const GAUGE_TOL: f64 = 1e-12;

impl GaugeElement {
    /// Anti-Hermitian with respect to the standard metric.
    pub fn anti_hermitian(blocks: Vec<ComplexMatrix>) -> Result<Self> {
        for (v, u) in blocks.iter().enumerate() {
            check_square(u, v)?;
            let defect = max_entry(&(u + u.adjoint()));
            if defect > GAUGE_TOL * max_entry(u).max(1.0) {
                return Err(Error::validation(format!(
                    "gauge block {v} is not anti-Hermitian (defect {defect:.3e})"
                )));
            }
        }
        Ok(GaugeElement(blocks))
    }

    /// Anti-self-adjoint with respect to `h`: `u^† h + h u = 0`.
    pub fn new(blocks: Vec<ComplexMatrix>, h: &HermitianMetricFamily) -> Result<Self> {
        if blocks.len() != h.blocks().len() {
            return Err(Error::validation("gauge element does not match the metric family"));
        }
        for (v, (u, hv)) in blocks.iter().zip(h.blocks()).enumerate() {
            check_square(u, v)?;
            if u.nrows() != hv.dim() {
                return Err(Error::shape(format!("gauge block {v} has the wrong dimension")));
            }
            let hu = hv.as_matrix() * u;
            let defect = max_entry(&(&hu + hu.adjoint()));
            if defect > GAUGE_TOL * max_entry(&hu).max(1.0) {
                return Err(Error::validation(format!(
                    "gauge block {v} is not anti-self-adjoint (defect {defect:.3e})"
                )));
            }
        }
        Ok(GaugeElement(blocks))
    }

    pub fn zero(dims: &DimensionVector) -> Self {
        GaugeElement(dims.as_slice().iter().map(|&d| DMatrix::zeros(d, d)).collect())
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.0
    }

    /// Algebra bracket `[u1, u2] = u1·u2 − u2·u1`; with right action this is
    /// the matrix commutator `u2 u1 − u1 u2`.
    pub fn bracket(&self, other: &GaugeElement) -> GaugeElement {
        GaugeElement(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| b * a - a * b)
                .collect(),
        )
    }

    pub fn add(&self, other: &GaugeElement) -> GaugeElement {
        GaugeElement(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> GaugeElement {
        GaugeElement(self.0.iter().map(|a| a.scale(c)).collect())
    }
}

fn check_square(u: &ComplexMatrix, v: usize) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::shape(format!("gauge block {v} is not square")));
    }
    Ok(())
}

fn max_entry(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn check_instance(r: &Representation, eta: &StabilityParams, w: &KahlerData) -> Result<()> {
    if eta.len() != r.quiver().num_vertices() {
        return Err(Error::validation("stability parameters do not match the quiver"));
    }
    if w.weights().len() != r.quiver().num_arrows() {
        return Err(Error::validation("arrow weights do not match the quiver"));
    }
    Ok(())
}

fn check_metric(r: &Representation, h: &HermitianMetricFamily) -> Result<()> {
    if h.blocks().len() != r.quiver().num_vertices() {
        return Err(Error::validation("metric family does not match the quiver"));
    }
    for (v, hv) in h.blocks().iter().enumerate() {
        if hv.dim() != r.dims().get(v) {
            return Err(Error::validation(format!(
                "metric block {v} has dimension {}, expected {}",
                hv.dim(),
                r.dims().get(v)
            )));
        }
    }
    Ok(())
}

/// Arrow part of the moment map, `Σ_src w T^{†h}T − Σ_tgt w T T^{†h}`, with
/// the adjoints supplied by the caller.
pub(crate) fn arrow_moment(
    r: &Representation,
    adjoints: &[ComplexMatrix],
    w: &KahlerData,
) -> Vec<ComplexMatrix> {
    let dims = r.dims().as_slice();
    let mut blocks: Vec<ComplexMatrix> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (a, arrow) in r.quiver().arrows().iter().enumerate() {
        let t = r.map(a);
        let wa = w.weight(a);
        blocks[arrow.src] += (&adjoints[a] * t).scale(wa);
        blocks[arrow.dst] -= (t * &adjoints[a]).scale(wa);
    }
    blocks
}

pub fn king_residual(
    r: &Representation,
    h: &HermitianMetricFamily,
    eta: &StabilityParams,
    w: &KahlerData,
) -> Result<MomentResidual> {
    check_instance(r, eta, w)?;
    check_metric(r, h)?;
    let adjoints = r
        .quiver()
        .arrows()
        .iter()
        .enumerate()
        .map(|(a, arrow)| metric_adjoint(r.map(a), h.get(arrow.src), h.get(arrow.dst)))
        .collect::<Result<Vec<_>>>()?;
    let mut blocks = arrow_moment(r, &adjoints, w);
    let mut sup_norm: f64 = 0.0;
    let mut trace_sum = 0.0;
    for (v, mu) in blocks.iter_mut().enumerate() {
        for i in 0..mu.nrows() {
            mu[(i, i)] -= c64(eta.get(v), 0.0);
        }
        if mu.nrows() == 0 {
            continue;
        }
        trace_sum += crate::numerics::trace(mu).re;
        // Spectral radius of an h-self-adjoint block: conjugate by h^{1/2}.
        let g = h.get(v).sqrt()?;
        let g_inv = h.get(v).solve(&g);
        let sym = HermitianMatrix::from_matrix_unchecked(&g * &*mu * g_inv);
        sup_norm = sup_norm.max(sym.op_norm()?);
    }
    Ok(MomentResidual {
        blocks,
        sup_norm,
        trace_sum,
    })
}

fn check_log_metric(r: &Representation, s: &[HermitianMatrix]) -> Result<()> {
    if s.len() != r.quiver().num_vertices() {
        return Err(Error::validation("log-metric family does not match the quiver"));
    }
    for (v, sv) in s.iter().enumerate() {
        if sv.dim() != r.dims().get(v) {
            return Err(Error::validation(format!("log-metric block {v} has the wrong dimension")));
        }
    }
    Ok(())
}

/// Half-exponentials `exp(±s_v/2)`, failing with the offending vertex on
/// overflow.
fn half_exponentials(s: &[HermitianMatrix]) -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
    let mut g = Vec::with_capacity(s.len());
    let mut g_inv = Vec::with_capacity(s.len());
    for (v, sv) in s.iter().enumerate() {
        let e = sv.eigh()?;
        if e.values.iter().any(|x| !(x / 2.0).exp().is_finite() || !(-x / 2.0).exp().is_finite()) {
            return Err(Error::Numeric(format!("exponential overflow at vertex {v}")));
        }
        g.push(e.reconstruct(|x| (x / 2.0).exp()));
        g_inv.push(e.reconstruct(|x| (-x / 2.0).exp()));
    }
    Ok((g, g_inv))
}

/// `D(exp(s))`, computed as `Σ w ‖g_t T g_s^{-1}‖² + Σ η_v Tr s_v` with
/// `g = exp(s/2)`.
pub fn kempf_ness_value(
    r: &Representation,
    s: &[HermitianMatrix],
    eta: &StabilityParams,
    w: &KahlerData,
) -> Result<f64> {
    check_instance(r, eta, w)?;
    check_log_metric(r, s)?;
    let (g, g_inv) = half_exponentials(s)?;
    let t = r.transform(&g, &g_inv);
    let value = functional_at(&t, s.iter().map(|x| crate::numerics::trace(x.as_matrix()).re), eta, w);
    if !value.is_finite() {
        return Err(Error::Numeric("Kempf–Ness functional is not finite".into()));
    }
    Ok(value)
}

pub(crate) fn functional_at(
    t: &Representation,
    log_dets: impl Iterator<Item = f64>,
    eta: &StabilityParams,
    w: &KahlerData,
) -> f64 {
    let arrows: f64 = t
        .maps()
        .iter()
        .enumerate()
        .map(|(a, m)| w.weight(a) * crate::numerics::frobenius_sq(m))
        .sum();
    let eta_term: f64 = log_dets.zip(eta.as_slice()).map(|(ld, e)| e * ld).sum();
    arrows + eta_term
}

/// Moment map of the transformed representation `T' = g T g^{-1}` in the
/// standard metric; Hermitian blocks.
pub(crate) fn standard_moment(
    t: &Representation,
    eta: &StabilityParams,
    w: &KahlerData,
) -> Vec<HermitianMatrix> {
    let adjoints: Vec<ComplexMatrix> = t.maps().iter().map(|m| m.adjoint()).collect();
    arrow_moment(t, &adjoints, w)
        .into_iter()
        .enumerate()
        .map(|(v, mut mu)| {
            for i in 0..mu.nrows() {
                mu[(i, i)] -= c64(eta.get(v), 0.0);
            }
            HermitianMatrix::from_matrix_unchecked(mu)
        })
        .collect()
}

/// Gradient of `s ↦ D(exp(s))` with respect to `Re Tr(G σ)`.
///
/// With `s = U diag(λ) U^†` and `μ' = g μ g^{-1}` (`g = exp(s/2)`), the
/// derivative of `exp` contributes the kernel
/// `K_ij = 2 sinh((λ_i − λ_j)/2) / (λ_i − λ_j)`, and
/// `G = −U (K ∘ U^† μ' U) U^†`. At `s = 0` this is `−μ`.
pub fn kempf_ness_gradient(
    r: &Representation,
    s: &[HermitianMatrix],
    eta: &StabilityParams,
    w: &KahlerData,
) -> Result<Vec<HermitianMatrix>> {
    check_instance(r, eta, w)?;
    check_log_metric(r, s)?;
    let (g, g_inv) = half_exponentials(s)?;
    let t = r.transform(&g, &g_inv);
    let mu = standard_moment(&t, eta, w);
    s.iter()
        .zip(&mu)
        .map(|(sv, muv)| {
            let e = sv.eigh()?;
            let u = &e.vectors;
            let mut m = u.adjoint() * muv.as_matrix() * u;
            let n = m.nrows();
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] *= sinhc_kernel(e.values[i] - e.values[j]);
                }
            }
            Ok(HermitianMatrix::from_matrix_unchecked(-(u * m * u.adjoint())))
        })
        .collect()
}

/// `2 sinh(x/2) / x`, equal to 1 at 0.
pub(crate) fn sinhc_kernel(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + x * x / 24.0
    } else {
        2.0 * (x / 2.0).sinh() / x
    }
}

// ---------------------------------------------------------------------------
// Hamiltonians

/// `[A, u]_a = u_{t(a)} T_a − T_a u_{s(a)}`.
pub fn bracket_a_u(r: &Representation, u: &GaugeElement) -> Vec<ComplexMatrix> {
    r.quiver()
        .arrows()
        .iter()
        .zip(r.maps())
        .map(|(arrow, t)| &u.blocks()[arrow.dst] * t - t * &u.blocks()[arrow.src])
        .collect()
}

/// `ω₀(X, Ȳ) = Σ_a w_a Tr(X_a Y_a^†)`.
pub fn omega0(x: &[ComplexMatrix], y: &[ComplexMatrix], w: &KahlerData) -> C64 {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(a, (xa, ya))| {
            let mut acc = C64::default();
            for i in 0..xa.nrows() {
                for j in 0..xa.ncols() {
                    acc += xa[(i, j)] * ya[(i, j)].conj();
                }
            }
            acc * w.weight(a)
        })
        .sum()
}

/// `η(Tr u) = Σ_v √−1 η_v Tr u_v`.
fn eta_trace(u: &GaugeElement, eta: &StabilityParams) -> C64 {
    u.blocks()
        .iter()
        .enumerate()
        .map(|(v, b)| C64::i() * eta.get(v) * crate::numerics::trace(b))
        .sum()
}

fn check_gauge(r: &Representation, u: &GaugeElement) -> Result<()> {
    if u.blocks().len() != r.quiver().num_vertices() {
        return Err(Error::validation("gauge element does not match the quiver"));
    }
    for (v, b) in u.blocks().iter().enumerate() {
        if b.nrows() != r.dims().get(v) {
            return Err(Error::shape(format!("gauge block {v} has the wrong dimension")));
        }
    }
    Ok(())
}

/// `H_u(A) = η(Tr u) + ½ Im ω₀(A, conj([A, u]))` on a free module (`h = Id`,
/// `d = 0`). `u` must be anti-Hermitian.
pub fn hamiltonian_trivial(
    u: &GaugeElement,
    a: &Representation,
    eta: &StabilityParams,
    w: &KahlerData,
) -> Result<f64> {
    check_instance(a, eta, w)?;
    check_gauge(a, u)?;
    let u = GaugeElement::anti_hermitian(u.blocks().to_vec())?;
    let e = eta_trace(&u, eta);
    let comm = bracket_a_u(a, &u);
    Ok(e.re + 0.5 * omega0(a.maps(), &comm, w).im)
}

/// Both sides of the identity
/// `ω([u1,A], [u2,A]) = η(Tr[u1,u2]) + ½ ω(A, [A,[u1,u2]])`
/// with `ω(X, Y) = Im ω₀(X, conj Y)`.
pub fn poisson_bracket_check(
    u1: &GaugeElement,
    u2: &GaugeElement,
    a: &Representation,
    eta: &StabilityParams,
    w: &KahlerData,
) -> Result<(f64, f64)> {
    check_instance(a, eta, w)?;
    check_gauge(a, u1)?;
    check_gauge(a, u2)?;
    // [u, A] = −[A, u].
    let x1: Vec<_> = bracket_a_u(a, u1).into_iter().map(|m| -m).collect();
    let x2: Vec<_> = bracket_a_u(a, u2).into_iter().map(|m| -m).collect();
    let lhs = omega0(&x1, &x2, w).im;
    let c = u1.bracket(u2);
    let rhs = eta_trace(&c, eta).re + 0.5 * omega0(a.maps(), &bracket_a_u(a, &c), w).im;
    Ok((lhs, rhs))
}

const PROJECTOR_TOL: f64 = 1e-12;

/// Hamiltonian on the projective module `P·𝒜^n` with `A = A_can + δA` and
/// `A_can = 0` (the quiver differential vanishes). `delta` is a
/// representation whose every vertex has the ambient dimension `n`.
pub fn hamiltonian_projector(
    u: &GaugeElement,
    delta: &Representation,
    p: &[ComplexMatrix],
    eta: &StabilityParams,
    w: &KahlerData,
) -> Result<f64> {
    check_instance(delta, eta, w)?;
    check_gauge(delta, u)?;
    if p.len() != delta.quiver().num_vertices() {
        return Err(Error::validation("projector family does not match the quiver"));
    }
    for (v, pv) in p.iter().enumerate() {
        if pv.shape() != (delta.dims().get(v), delta.dims().get(v)) {
            return Err(Error::shape(format!("projector {v} has the wrong shape")));
        }
        let scale = max_entry(pv).max(1.0);
        if max_entry(&(pv * pv - pv)) > PROJECTOR_TOL * scale
            || max_entry(&(pv - pv.adjoint())) > PROJECTOR_TOL * scale
        {
            return Err(Error::validation(format!("P at vertex {v} is not a self-adjoint projector")));
        }
        let ub = &u.blocks()[v];
        if max_entry(&(pv * ub * pv - ub)) > PROJECTOR_TOL * max_entry(ub).max(1.0) {
            return Err(Error::validation(format!("u at vertex {v} is not compressed by P")));
        }
    }
    for (arrow, t) in delta.quiver().arrows().iter().zip(delta.maps()) {
        let c = &p[arrow.dst] * t * &p[arrow.src];
        if max_entry(&(c - t)) > PROJECTOR_TOL * max_entry(t).max(1.0) {
            return Err(Error::validation(format!(
                "δA on arrow \"{}\" is not compressed by P",
                arrow.id
            )));
        }
    }
    hamiltonian_trivial(u, delta, eta, w)
}
