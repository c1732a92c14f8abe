//! The cyclic functional `Ξ` on triple tensors of the doubled bimodule
//! `𝔹 = 𝒜 ⊕ Ω¹ ⊕ conj(Ω¹)` over `𝒜 = ℂ^{Q₀}`, and the universal
//! Hamiltonian `H_u = (√−1/2) Ξ(Trace_E(C₃))`.
//!
//! Only the quiver case is handled: the differential vanishes, so only the
//! pure-idempotent term and the two Kähler-form terms of `Ξ` survive.
//!
//! `𝔹` is spanned by generators with definite end vertices:
//! `π_v ∈ π_v 𝔹 π_v`, `a ∈ π_{s(a)} 𝔹 π_{t(a)}` and
//! `ā ∈ π_{t(a)} 𝔹 π_{s(a)}`. A triple `g₁ ⊗ g₂ ⊗ g₃` survives in the cyclic
//! coinvariants of `𝔹 ⊗_𝒜 𝔹 ⊗_𝒜 𝔹` exactly when it is composable around the
//! cycle.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::moment::{
    hamiltonian_projector, hamiltonian_trivial, GaugeElement, HermitianMetricFamily, KahlerData,
};
use crate::numerics::{
    c64, metric_adjoint, random_complex, random_hermitian, trace, ComplexMatrix, HermitianMatrix, C64,
};
use crate::quiver::{random_representation, DimensionVector, Quiver, Representation, StabilityParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Idempotent(usize),
    Arrow(usize),
    ConjArrow(usize),
}

impl Generator {
    /// `(left, right)` idempotents, so that `π_left · g · π_right = g`.
    pub fn ends(&self, q: &Quiver) -> (usize, usize) {
        match *self {
            Generator::Idempotent(v) => (v, v),
            Generator::Arrow(a) => (q.arrows()[a].src, q.arrows()[a].dst),
            Generator::ConjArrow(a) => (q.arrows()[a].dst, q.arrows()[a].src),
        }
    }

    fn index(&self, q: &Quiver) -> usize {
        let (nv, na) = (q.num_vertices(), q.num_arrows());
        match *self {
            Generator::Idempotent(v) => v,
            Generator::Arrow(a) => nv + a,
            Generator::ConjArrow(a) => nv + na + a,
        }
    }

    fn from_index(q: &Quiver, i: usize) -> Generator {
        let (nv, na) = (q.num_vertices(), q.num_arrows());
        if i < nv {
            Generator::Idempotent(i)
        } else if i < nv + na {
            Generator::Arrow(i - nv)
        } else {
            Generator::ConjArrow(i - nv - na)
        }
    }
}

fn generator_count(q: &Quiver) -> usize {
    q.num_vertices() + 2 * q.num_arrows()
}

/// An element of `𝔹` in the generator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BElement {
    pub f: Vec<C64>,
    pub alpha: Vec<C64>,
    pub alpha_bar: Vec<C64>,
}

impl BElement {
    pub fn zero(q: &Quiver) -> Self {
        BElement {
            f: vec![C64::default(); q.num_vertices()],
            alpha: vec![C64::default(); q.num_arrows()],
            alpha_bar: vec![C64::default(); q.num_arrows()],
        }
    }

    pub fn unit(q: &Quiver) -> Self {
        BElement {
            f: vec![c64(1.0, 0.0); q.num_vertices()],
            ..BElement::zero(q)
        }
    }

    pub fn algebra(f: Vec<C64>, q: &Quiver) -> Self {
        BElement { f, ..BElement::zero(q) }
    }

    pub fn forms(alpha: Vec<C64>, q: &Quiver) -> Self {
        BElement {
            alpha,
            ..BElement::zero(q)
        }
    }

    pub fn conj_forms(alpha_bar: Vec<C64>, q: &Quiver) -> Self {
        BElement {
            alpha_bar,
            ..BElement::zero(q)
        }
    }

    pub fn random<R: Rng + ?Sized>(q: &Quiver, rng: &mut R) -> Self {
        let mut draw = |n: usize| -> Vec<C64> {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    c64(re, im)
                })
                .collect()
        };
        BElement {
            f: draw(q.num_vertices()),
            alpha: draw(q.num_arrows()),
            alpha_bar: draw(q.num_arrows()),
        }
    }

    pub fn coefficient(&self, g: Generator) -> C64 {
        match g {
            Generator::Idempotent(v) => self.f[v],
            Generator::Arrow(a) => self.alpha[a],
            Generator::ConjArrow(a) => self.alpha_bar[a],
        }
    }

    /// Left multiplication by `g ∈ 𝒜`.
    pub fn left_mul(&self, q: &Quiver, g: &[C64]) -> Self {
        BElement {
            f: self.f.iter().zip(g).map(|(x, y)| y * x).collect(),
            alpha: q.arrows().iter().zip(&self.alpha).map(|(a, x)| g[a.src] * x).collect(),
            alpha_bar: q.arrows().iter().zip(&self.alpha_bar).map(|(a, x)| g[a.dst] * x).collect(),
        }
    }

    /// Right multiplication by `g ∈ 𝒜`.
    pub fn right_mul(&self, q: &Quiver, g: &[C64]) -> Self {
        BElement {
            f: self.f.iter().zip(g).map(|(x, y)| x * y).collect(),
            alpha: q.arrows().iter().zip(&self.alpha).map(|(a, x)| x * g[a.dst]).collect(),
            alpha_bar: q.arrows().iter().zip(&self.alpha_bar).map(|(a, x)| x * g[a.src]).collect(),
        }
    }
}

/// Dense coefficients over composable generator triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleTensor {
    quiver: Arc<Quiver>,
    coeffs: Vec<C64>,
}

impl TripleTensor {
    pub fn zero(q: &Arc<Quiver>) -> Self {
        let g = generator_count(q);
        TripleTensor {
            quiver: q.clone(),
            coeffs: vec![C64::default(); g * g * g],
        }
    }

    pub fn quiver(&self) -> &Arc<Quiver> {
        &self.quiver
    }

    fn slot(&self, g: [Generator; 3]) -> usize {
        let n = generator_count(&self.quiver);
        let [a, b, c] = g.map(|x| x.index(&self.quiver));
        (a * n + b) * n + c
    }

    pub fn is_composable(q: &Quiver, g: [Generator; 3]) -> bool {
        let e = g.map(|x| x.ends(q));
        e[0].1 == e[1].0 && e[1].1 == e[2].0 && e[2].1 == e[0].0
    }

    pub fn get(&self, g: [Generator; 3]) -> C64 {
        self.coeffs[self.slot(g)]
    }

    pub fn set(&mut self, g: [Generator; 3], value: C64) -> Result<()> {
        if !Self::is_composable(&self.quiver, g) {
            return Err(Error::validation(format!("triple {g:?} is not composable")));
        }
        let i = self.slot(g);
        self.coeffs[i] = value;
        Ok(())
    }

    /// Image of `b₁ ⊗ b₂ ⊗ b₃` in the cyclic coinvariants.
    pub fn elementary(q: &Arc<Quiver>, b: [&BElement; 3]) -> Self {
        let mut t = TripleTensor::zero(q);
        for g in composable_triples(q) {
            let i = t.slot(g);
            t.coeffs[i] = b[0].coefficient(g[0]) * b[1].coefficient(g[1]) * b[2].coefficient(g[2]);
        }
        t
    }

    /// `b₁ ⊗ b₂ ⊗ b₃ ↦ b₂ ⊗ b₃ ⊗ b₁`.
    pub fn rotate(&self) -> Self {
        let mut out = TripleTensor::zero(&self.quiver);
        for g in composable_triples(&self.quiver) {
            let i = out.slot(g);
            out.coeffs[i] = self.get([g[2], g[0], g[1]]);
        }
        out
    }

    pub fn add(&self, other: &TripleTensor) -> Self {
        TripleTensor {
            quiver: self.quiver.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        TripleTensor {
            quiver: self.quiver.clone(),
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// True when every non-composable slot is zero.
    pub fn is_balanced(&self) -> bool {
        let n = generator_count(&self.quiver);
        (0..n * n * n).all(|i| {
            let g = [i / (n * n), (i / n) % n, i % n].map(|k| Generator::from_index(&self.quiver, k));
            Self::is_composable(&self.quiver, g) || self.coeffs[i] == C64::default()
        })
    }
}

pub fn composable_triples(q: &Quiver) -> Vec<[Generator; 3]> {
    let n = generator_count(q);
    let gens: Vec<Generator> = (0..n).map(|i| Generator::from_index(q, i)).collect();
    let mut out = Vec::new();
    for &a in &gens {
        for &b in &gens {
            for &c in &gens {
                if TripleTensor::is_composable(q, [a, b, c]) {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// A representation with a metric; the doubled connection sends `φ` to
/// `(φ, T φ, T^{†h} φ)`.
#[derive(Debug, Clone)]
pub struct ConnectionData {
    pub rep: Representation,
    pub metric: HermitianMetricFamily,
    pub adjoints: Vec<ComplexMatrix>,
}

impl ConnectionData {
    pub fn new(rep: Representation, metric: HermitianMetricFamily) -> Result<Self> {
        if metric.blocks().len() != rep.quiver().num_vertices() {
            return Err(Error::validation("metric family does not match the quiver"));
        }
        let adjoints = rep
            .quiver()
            .arrows()
            .iter()
            .enumerate()
            .map(|(a, arrow)| metric_adjoint(rep.map(a), metric.get(arrow.src), metric.get(arrow.dst)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::validation(e.to_string()))?;
        Ok(ConnectionData {
            rep,
            metric,
            adjoints,
        })
    }

    fn generator_matrix(&self, g: Generator) -> ComplexMatrix {
        match g {
            Generator::Idempotent(v) => {
                let d = self.rep.dims().get(v);
                DMatrix::identity(d, d)
            }
            Generator::Arrow(a) => self.rep.map(a).clone(),
            Generator::ConjArrow(a) => self.adjoints[a].clone(),
        }
    }
}

/// `Trace_E(C₃)`: the coefficient of `g₁ ⊗ g₂ ⊗ g₃` is
/// `Tr(M_{g₃} M_{g₂} M_{g₁} u)`, where `M` is the identity on idempotents,
/// `T_a` on arrows and `T_a^{†h}` on conjugate arrows.
pub fn trace_c3(u: &GaugeElement, c: &ConnectionData) -> Result<TripleTensor> {
    let q = c.rep.quiver();
    if u.blocks().len() != q.num_vertices() {
        return Err(Error::validation("gauge element does not match the quiver"));
    }
    for (v, b) in u.blocks().iter().enumerate() {
        if b.shape() != (c.rep.dims().get(v), c.rep.dims().get(v)) {
            return Err(Error::validation(format!("gauge block {v} has the wrong shape")));
        }
    }
    let mut t = TripleTensor::zero(q);
    for g in composable_triples(q) {
        let start = g[0].ends(q).0;
        let m = c.generator_matrix(g[2]) * c.generator_matrix(g[1]) * c.generator_matrix(g[0]);
        let i = t.slot(g);
        t.coeffs[i] = trace(&(m * &u.blocks()[start]));
    }
    Ok(t)
}

/// `Ξ` on a balanced triple tensor.
///
/// Surviving terms: `π_v⊗π_v⊗π_v ↦ −2√−1 η(π_v) = 2η_v`; the three
/// rotations of `a ⊗ ā ⊗ π_{s(a)}` carry `−w_a`; the three rotations of
/// `ā ⊗ a ⊗ π_{t(a)}` carry `+w_a`.
pub fn xi_evaluate(t: &TripleTensor, eta: &StabilityParams, w: &KahlerData) -> C64 {
    use Generator::*;
    let q = t.quiver.clone();
    let mut acc = C64::default();
    for v in 0..q.num_vertices() {
        let p = Idempotent(v);
        acc += t.get([p, p, p]) * (2.0 * eta.get(v));
    }
    for (a, arrow) in q.arrows().iter().enumerate() {
        let (x, xb) = (Arrow(a), ConjArrow(a));
        let (ps, pt) = (Idempotent(arrow.src), Idempotent(arrow.dst));
        let minus = t.get([x, xb, ps]) + t.get([xb, ps, x]) + t.get([ps, x, xb]);
        let plus = t.get([xb, x, pt]) + t.get([x, pt, xb]) + t.get([pt, xb, x]);
        acc += (plus - minus) * w.weight(a);
    }
    acc
}

/// `Ξ(b₁ ⊗ b₂ ⊗ b₃)` evaluated from the defining formulas with bimodule
/// operations, without forming a tensor:
/// `−2√−1 η(f₁f₂f₃) + Σ_cyc [−ω(α₁, ᾱ₂·f₃) + ω(α₂·f₃, ᾱ₁)]`,
/// where `ω(α, β̄) = Σ_a w_a α_a β̄_a` and `η(f) = Σ_v √−1 η_v f_v`.
pub fn xi_elementary(
    q: &Quiver,
    b: [&BElement; 3],
    eta: &StabilityParams,
    w: &KahlerData,
) -> C64 {
    let eta_of = |f: &[C64]| -> C64 {
        f.iter()
            .enumerate()
            .map(|(v, x)| C64::i() * eta.get(v) * x)
            .sum()
    };
    let omega = |alpha: &[C64], beta_bar: &[C64]| -> C64 {
        alpha
            .iter()
            .zip(beta_bar)
            .enumerate()
            .map(|(a, (x, y))| x * y * w.weight(a))
            .sum()
    };
    let f123: Vec<C64> = (0..q.num_vertices())
        .map(|v| b[0].f[v] * b[1].f[v] * b[2].f[v])
        .collect();
    let mut acc = c64(0.0, -2.0) * eta_of(&f123);
    for r in 0..3 {
        let (x, y, z) = (b[r], b[(r + 1) % 3], b[(r + 2) % 3]);
        // conj(α_y)·f_z and α_y·f_z as right module actions.
        let ybar_z = BElement::conj_forms(y.alpha_bar.clone(), q).right_mul(q, &z.f);
        let y_z = BElement::forms(y.alpha.clone(), q).right_mul(q, &z.f);
        acc -= omega(&x.alpha, &ybar_z.alpha_bar);
        acc += omega(&y_z.alpha, &x.alpha_bar);
    }
    acc
}

const IMAG_TOL: f64 = 1e-10;

/// `H_u = (√−1/2) Ξ(Trace_E(C₃))`.
pub fn universal_hamiltonian(
    u: &GaugeElement,
    c: &ConnectionData,
    eta: &StabilityParams,
    w: &KahlerData,
) -> Result<f64> {
    let xi = xi_evaluate(&trace_c3(u, c)?, eta, w);
    let h = C64::i() * 0.5 * xi;
    if h.im.abs() > IMAG_TOL * h.re.abs().max(1.0) {
        return Err(Error::Consistency(format!(
            "universal Hamiltonian has imaginary part {:.3e}",
            h.im
        )));
    }
    Ok(h.re)
}

/// Evaluates `Ξ` on the relations that define the balanced tensor product
/// and the cyclic coinvariants, returning the largest `|Ξ|`.
pub fn xi_welldefinedness_probe(
    q: &Arc<Quiver>,
    eta: &StabilityParams,
    w: &KahlerData,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::validation("samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = |b: [&BElement; 3]| xi_elementary(q, b, eta, w);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let g = BElement::random(q, &mut rng).f;
        let [b1, b2, b3] = [0; 3].map(|_| BElement::random(q, &mut rng));
        let f = |b: &BElement| BElement::algebra(b.f.clone(), q);
        let al = |b: &BElement| BElement::forms(b.alpha.clone(), q);
        let ab = |b: &BElement| BElement::conj_forms(b.alpha_bar.clone(), q);
        let relations = [
            // Balancing across the first and second slot, generic grades.
            xi([&b1.right_mul(q, &g), &b2, &b3]) - xi([&b1, &b2.left_mul(q, &g), &b3]),
            // Balancing across the second and third slot.
            xi([&b1, &b2.right_mul(q, &g), &b3]) - xi([&b1, &b2, &b3.left_mul(q, &g)]),
            // Cyclic coinvariance: g·b₁ ⊗ b₂ ⊗ b₃ − b₁ ⊗ b₂ ⊗ b₃·g.
            xi([&b1.left_mul(q, &g), &b2, &b3]) - xi([&b1, &b2, &b3.right_mul(q, &g)]),
            // f₁g ⊗ α₂ ⊗ f₃ − f₁ ⊗ gα₂ ⊗ f₃.
            xi([&f(&b1).right_mul(q, &g), &al(&b2), &f(&b3)])
                - xi([&f(&b1), &al(&b2).left_mul(q, &g), &f(&b3)]),
            // α₁g ⊗ ᾱ₂ ⊗ f₃ − α₁ ⊗ gᾱ₂ ⊗ f₃.
            xi([&al(&b1).right_mul(q, &g), &ab(&b2), &f(&b3)])
                - xi([&al(&b1), &ab(&b2).left_mul(q, &g), &f(&b3)]),
            // f₁ ⊗ ᾱ₂g ⊗ α₃ − f₁ ⊗ ᾱ₂ ⊗ gα₃.
            xi([&f(&b1), &ab(&b2).right_mul(q, &g), &al(&b3)])
                - xi([&f(&b1), &ab(&b2), &al(&b3).left_mul(q, &g)]),
            // gα₁ ⊗ ᾱ₂ ⊗ f₃ − α₁ ⊗ ᾱ₂ ⊗ f₃g.
            xi([&al(&b1).left_mul(q, &g), &ab(&b2), &f(&b3)])
                - xi([&al(&b1), &ab(&b2), &f(&b3).right_mul(q, &g)]),
        ];
        for r in relations {
            worst = worst.max(r.norm());
        }
    }
    Ok(worst)
}

/// Data `(u, δA, P)` on the free module with ambient dimension `n` at every
/// vertex, presenting `(u, T)` with metric `h` through a self-adjoint
/// projector family: `g_v = h_v^{1/2}` turns `h` into the standard metric,
/// and a random isometry `V_v : ℂ^{d_v} → ℂ^n` embeds each vertex space.
pub fn projector_presentation<R: Rng + ?Sized>(
    u: &GaugeElement,
    c: &ConnectionData,
    n: usize,
    rng: &mut R,
) -> Result<(GaugeElement, Representation, Vec<ComplexMatrix>)> {
    let q = c.rep.quiver();
    let dims = c.rep.dims();
    if dims.as_slice().iter().any(|&d| d > n) {
        return Err(Error::validation("ambient dimension is smaller than a vertex dimension"));
    }
    let mut g = Vec::new();
    let mut g_inv = Vec::new();
    let mut iso = Vec::new();
    for v in 0..q.num_vertices() {
        let h = c.metric.get(v);
        let s = h.sqrt()?;
        g_inv.push(h.solve(&s));
        g.push(s);
        let d = dims.get(v);
        let unitary = random_complex(n, n, rng).qr().q();
        iso.push(unitary.columns(0, d).into_owned());
    }
    let standard = c.rep.transform(&g, &g_inv);
    let u_blocks: Vec<ComplexMatrix> = (0..q.num_vertices())
        .map(|v| {
            let ut = &g[v] * &u.blocks()[v] * &g_inv[v];
            // Exact anti-Hermitian part removes roundoff from the transport.
            let ut = (&ut - ut.adjoint()).scale(0.5);
            &iso[v] * ut * iso[v].adjoint()
        })
        .collect();
    let maps: Vec<ComplexMatrix> = q
        .arrows()
        .iter()
        .zip(standard.maps())
        .map(|(a, t)| &iso[a.dst] * t * iso[a.src].adjoint())
        .collect();
    let ambient = DimensionVector::new(q, vec![n; q.num_vertices()])?;
    let delta = Representation::new(q.clone(), ambient, maps)?;
    let proj = iso.iter().map(|v| v * v.adjoint()).collect();
    Ok((GaugeElement::anti_hermitian(u_blocks)?, delta, proj))
}

/// Random `u` with `u^{†h} = −u`: `u = g^{-1} (√−1 H) g` with `g = h^{1/2}`.
pub fn random_gauge<R: Rng + ?Sized>(h: &HermitianMetricFamily, rng: &mut R) -> Result<GaugeElement> {
    let mut blocks = Vec::new();
    for hv in h.blocks() {
        let g = hv.sqrt()?;
        let g_inv = hv.solve(&g);
        let x = random_hermitian(hv.dim(), rng).into_matrix() * C64::i();
        blocks.push(g_inv * x * g);
    }
    GaugeElement::new(blocks, h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalReport {
    pub samples: usize,
    pub max_deviation: f64,
}

/// Compares the universal Hamiltonian with the direct formulas over random
/// `(u, T, h)`: the first sample uses `h = Id` against the free-module
/// Hamiltonian, later samples use random metrics against the projector
/// presentation.
pub fn verify_universal(
    q: &Arc<Quiver>,
    dims: &DimensionVector,
    eta: &StabilityParams,
    w: &KahlerData,
    samples: usize,
    seed: u64,
) -> Result<UniversalReport> {
    if samples == 0 {
        return Err(Error::validation("samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ambient = dims.as_slice().iter().copied().max().unwrap_or(0) + 1;
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let rep = random_representation(q, dims, rng.random());
        let metric = if k == 0 {
            HermitianMetricFamily::identity(dims)
        } else {
            let logs: Vec<HermitianMatrix> = dims
                .as_slice()
                .iter()
                .map(|&d| random_hermitian(d, &mut rng).scale(0.5))
                .collect();
            HermitianMetricFamily::from_log(&logs)?
        };
        let u = random_gauge(&metric, &mut rng)?;
        let conn = ConnectionData::new(rep.clone(), metric)?;
        let universal = universal_hamiltonian(&u, &conn, eta, w)?;
        let direct = if k == 0 {
            hamiltonian_trivial(&u, &rep, eta, w)?
        } else {
            let (ua, delta, proj) = projector_presentation(&u, &conn, ambient, &mut rng)?;
            hamiltonian_projector(&ua, &delta, &proj, eta, w)?
        };
        worst = worst.max((universal - direct).abs());
    }
    Ok(UniversalReport {
        samples,
        max_deviation: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::PositiveDefiniteMatrix;

    fn loop_quiver() -> Arc<Quiver> {
        Arc::new(Quiver::new(["v"], vec![("a".into(), "v".into(), "v".into())]).unwrap())
    }

    fn three_vertex() -> Arc<Quiver> {
        Arc::new(
            Quiver::new(
                ["1", "2", "3"],
                vec![
                    ("a".into(), "1".into(), "2".into()),
                    ("b".into(), "2".into(), "3".into()),
                    ("c".into(), "3".into(), "1".into()),
                    ("l".into(), "2".into(), "2".into()),
                    ("m".into(), "1".into(), "3".into()),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_gauge_gives_zero_tensor() {
        let q = three_vertex();
        let d = DimensionVector::new(&q, vec![2, 1, 3]).unwrap();
        let rep = random_representation(&q, &d, 1);
        let c = ConnectionData::new(rep, HermitianMetricFamily::identity(&d)).unwrap();
        let t = trace_c3(&GaugeElement::zero(&d), &c).unwrap();
        assert_eq!(t.max_abs(), 0.0);
        assert!(t.is_balanced());
    }

    #[test]
    fn rank_one_tensor_is_elementary() {
        let q = loop_quiver();
        let d = DimensionVector::new(&q, vec![1]).unwrap();
        let alpha = c64(0.3, -1.2);
        let u = c64(0.0, 0.8);
        let rep = Representation::new(q.clone(), d.clone(), vec![ComplexMatrix::from_element(1, 1, alpha)]).unwrap();
        let c = ConnectionData::new(rep, HermitianMetricFamily::identity(&d)).unwrap();
        let gauge = GaugeElement::anti_hermitian(vec![ComplexMatrix::from_element(1, 1, u)]).unwrap();
        let t = trace_c3(&gauge, &c).unwrap();
        let one = BElement {
            f: vec![c64(1.0, 0.0)],
            alpha: vec![alpha],
            alpha_bar: vec![alpha.conj()],
        };
        let first = BElement {
            f: vec![u],
            alpha: vec![u * alpha],
            alpha_bar: vec![u * alpha.conj()],
        };
        let expected = TripleTensor::elementary(&q, [&first, &one, &one]);
        assert!(t.add(&expected.scale(c64(-1.0, 0.0))).max_abs() < 1e-15);
    }

    #[test]
    fn idempotent_triple_evaluates_to_twice_eta() {
        let q = three_vertex();
        let eta = StabilityParams::new(vec![0.5, -1.5, 0.25]).unwrap();
        let w = KahlerData::uniform(&q);
        let mut t = TripleTensor::zero(&q);
        let p = Generator::Idempotent(1);
        t.set([p, p, p], c64(1.0, 0.0)).unwrap();
        assert_eq!(xi_evaluate(&t, &eta, &w), c64(-3.0, 0.0));
        assert_eq!(xi_evaluate(&TripleTensor::zero(&q), &eta, &w), C64::default());
        assert!(t.set([Generator::Arrow(0), p, p], c64(1.0, 0.0)).is_err());
    }

    #[test]
    fn tensor_and_elementary_evaluations_agree_and_are_cyclic() {
        let q = three_vertex();
        let eta = StabilityParams::new(vec![0.5, -1.5, 0.25]).unwrap();
        let w = KahlerData::new(&q, vec![1.0, 0.5, 2.0, 1.5, 0.75]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let b = [0; 3].map(|_| BElement::random(&q, &mut rng));
            let direct = xi_elementary(&q, [&b[0], &b[1], &b[2]], &eta, &w);
            let t = TripleTensor::elementary(&q, [&b[0], &b[1], &b[2]]);
            let via_tensor = xi_evaluate(&t, &eta, &w);
            assert!((direct - via_tensor).norm() < 1e-12 * direct.norm().max(1.0));
            let rotated = xi_elementary(&q, [&b[1], &b[2], &b[0]], &eta, &w);
            assert!((rotated - direct).norm() < 1e-14 * direct.norm().max(1.0));
            assert!((xi_evaluate(&t.rotate(), &eta, &w) - via_tensor).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn two_vertex_tensor_matches_brute_force_contraction() {
        let q = Arc::new(Quiver::new(["1", "2"], vec![("a".into(), "1".into(), "2".into())]).unwrap());
        let d = DimensionVector::new(&q, vec![1, 1]).unwrap();
        let rep = random_representation(&q, &d, 9);
        let h = HermitianMetricFamily::new(
            &d,
            vec![
                PositiveDefiniteMatrix::from_real_diagonal(&[2.0]).unwrap(),
                PositiveDefiniteMatrix::from_real_diagonal(&[0.5]).unwrap(),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_gauge(&h, &mut rng).unwrap();
        let c = ConnectionData::new(rep.clone(), h).unwrap();
        let t = trace_c3(&u, &c).unwrap();

        // Total space ℂ² = E_1 ⊕ E_2; each generator as a 2x2 matrix.
        let emb = |g: Generator| -> ComplexMatrix {
            let mut m = ComplexMatrix::zeros(2, 2);
            match g {
                Generator::Idempotent(v) => m[(v, v)] = c64(1.0, 0.0),
                Generator::Arrow(_) => m[(1, 0)] = rep.map(0)[(0, 0)],
                Generator::ConjArrow(_) => m[(0, 1)] = c.adjoints[0][(0, 0)],
            }
            m
        };
        let mut big_u = ComplexMatrix::zeros(2, 2);
        big_u[(0, 0)] = u.blocks()[0][(0, 0)];
        big_u[(1, 1)] = u.blocks()[1][(0, 0)];
        let gens = [
            Generator::Idempotent(0),
            Generator::Idempotent(1),
            Generator::Arrow(0),
            Generator::ConjArrow(0),
        ];
        let mut nonzero = 0;
        for &g1 in &gens {
            for &g2 in &gens {
                for &g3 in &gens {
                    let (m1, m2, m3) = (emb(g1), emb(g2), emb(g3));
                    let mut s = C64::default();
                    for i in 0..2 {
                        for j in 0..2 {
                            for k in 0..2 {
                                for l in 0..2 {
                                    s += big_u[(j, i)] * m1[(k, j)] * m2[(l, k)] * m3[(i, l)];
                                }
                            }
                        }
                    }
                    if TripleTensor::is_composable(&q, [g1, g2, g3]) {
                        assert!((s - t.get([g1, g2, g3])).norm() < 1e-14);
                        nonzero += 1;
                    } else {
                        assert_eq!(s, C64::default());
                    }
                }
            }
        }
        assert_eq!(nonzero, 8);
    }

    #[test]
    fn universal_matches_direct_formulas() {
        let q = three_vertex();
        let d = DimensionVector::new(&q, vec![2, 3, 1]).unwrap();
        let eta = StabilityParams::new(vec![0.5, -0.5, 0.5]).unwrap();
        let w = KahlerData::new(&q, vec![1.0, 0.5, 2.0, 1.5, 0.75]).unwrap();
        let report = verify_universal(&q, &d, &eta, &w, 30, 5).unwrap();
        assert!(report.max_deviation < 1e-10, "{report:?}");
        assert!(verify_universal(&q, &d, &eta, &w, 0, 5).is_err());
    }

    #[test]
    fn universal_is_additive_in_u() {
        let q = three_vertex();
        let d = DimensionVector::new(&q, vec![2, 2, 2]).unwrap();
        let eta = StabilityParams::new(vec![0.1, 0.2, -0.3]).unwrap();
        let w = KahlerData::uniform(&q);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = HermitianMetricFamily::from_log(&[0; 3].map(|_| random_hermitian(2, &mut rng))).unwrap();
        let c = ConnectionData::new(random_representation(&q, &d, 2), h.clone()).unwrap();
        let u1 = random_gauge(&h, &mut rng).unwrap();
        let u2 = random_gauge(&h, &mut rng).unwrap();
        let sum = universal_hamiltonian(&u1.add(&u2.scale(2.5)), &c, &eta, &w).unwrap();
        let parts = universal_hamiltonian(&u1, &c, &eta, &w).unwrap()
            + 2.5 * universal_hamiltonian(&u2, &c, &eta, &w).unwrap();
        assert!((sum - parts).abs() < 1e-10);
    }

    #[test]
    fn probe_relations_vanish() {
        let q = three_vertex();
        let eta = StabilityParams::new(vec![0.5, -1.5, 0.25]).unwrap();
        let w = KahlerData::new(&q, vec![1.0, 0.5, 2.0, 1.5, 0.75]).unwrap();
        let dev = xi_welldefinedness_probe(&q, &eta, &w, 200, 1).unwrap();
        assert!(dev < 1e-12, "{dev}");
        assert!(xi_welldefinedness_probe(&q, &eta, &w, 0, 1).is_err());
    }
}
