//! Quivers, dimension vectors, stability parameters and representations,
//! plus the JSON problem format.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c64, ensure_finite, random_complex, ComplexMatrix, PositiveDefiniteMatrix};

/// Absolute tolerance on `Σ η_v d_v`.
pub const SLOPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrow {
    pub id: String,
    pub src: usize,
    pub dst: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quiver {
    vertices: Vec<String>,
    arrows: Vec<Arrow>,
    vertex_index: HashMap<String, usize>,
    arrow_index: HashMap<String, usize>,
}

impl Quiver {
    /// Builds a quiver from vertex ids and `(arrow id, source id, target id)`
    /// triples. Indices follow input order.
    pub fn new<V, A>(vertices: V, arrows: A) -> Result<Self>
    where
        V: IntoIterator,
        V::Item: Into<String>,
        A: IntoIterator<Item = (String, String, String)>,
    {
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        let mut vertex_index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if vertex_index.insert(v.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate vertex id \"{v}\"")));
            }
        }
        let mut out = Vec::new();
        let mut arrow_index = HashMap::new();
        for (id, src, dst) in arrows {
            let lookup = |name: &str| {
                vertex_index.get(name).copied().ok_or_else(|| {
                    Error::validation(format!("arrow \"{id}\" references unknown vertex \"{name}\""))
                })
            };
            let (s, t) = (lookup(&src)?, lookup(&dst)?);
            if arrow_index.insert(id.clone(), out.len()).is_some() {
                return Err(Error::validation(format!("duplicate arrow id \"{id}\"")));
            }
            out.push(Arrow { id, src: s, dst: t });
        }
        Ok(Quiver {
            vertices,
            arrows: out,
            vertex_index,
            arrow_index,
        })
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_arrows(&self) -> usize {
        self.arrows.len()
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertex_index.get(id).copied()
    }

    pub fn arrow_index(&self, id: &str) -> Option<usize> {
        self.arrow_index.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionVector(Vec<usize>);

impl DimensionVector {
    pub fn new(q: &Quiver, dims: Vec<usize>) -> Result<Self> {
        if dims.len() != q.num_vertices() {
            return Err(Error::validation(format!(
                "dimension vector has {} entries for {} vertices",
                dims.len(),
                q.num_vertices()
            )));
        }
        Ok(DimensionVector(dims))
    }

    pub fn get(&self, v: usize) -> usize {
        self.0[v]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &DimensionVector) -> DimensionVector {
        DimensionVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityParams(Vec<f64>);

impl StabilityParams {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("stability parameters must be finite"));
        }
        Ok(StabilityParams(values))
    }

    pub fn zeros(n: usize) -> Self {
        StabilityParams(vec![0.0; n])
    }

    pub fn get(&self, v: usize) -> f64 {
        self.0[v]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scale(&self, c: f64) -> Self {
        StabilityParams(self.0.iter().map(|x| x * c).collect())
    }

    /// `Σ_v η_v d_v`.
    pub fn slope(&self, d: &DimensionVector) -> f64 {
        self.0.iter().zip(d.as_slice()).map(|(e, &n)| e * n as f64).sum()
    }
}

/// Checks `|Σ η_v d_v| <= 1e-12`, returning the parameters and the sum.
pub fn validate_slope(eta: &StabilityParams, d: &DimensionVector) -> Result<(StabilityParams, f64)> {
    if eta.len() != d.as_slice().len() {
        return Err(Error::validation(format!(
            "stability parameters have {} entries, dimension vector {}",
            eta.len(),
            d.as_slice().len()
        )));
    }
    let sum = eta.slope(d);
    if sum.abs() > SLOPE_TOL {
        return Err(Error::validation(format!("slope constraint violated: {sum} ≠ 0")));
    }
    Ok((eta.clone(), sum))
}

/// Arrow maps `T_a : E_{s(a)} -> E_{t(a)}` stored as `dim t(a) x dim s(a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    quiver: Arc<Quiver>,
    dims: DimensionVector,
    maps: Vec<ComplexMatrix>,
}

impl Representation {
    pub fn new(quiver: Arc<Quiver>, dims: DimensionVector, maps: Vec<ComplexMatrix>) -> Result<Self> {
        if maps.len() != quiver.num_arrows() {
            return Err(Error::validation(format!(
                "{} arrow maps for {} arrows",
                maps.len(),
                quiver.num_arrows()
            )));
        }
        if dims.as_slice().len() != quiver.num_vertices() {
            return Err(Error::validation("dimension vector does not match the quiver"));
        }
        for (arrow, m) in quiver.arrows().iter().zip(&maps) {
            let want = (dims.get(arrow.dst), dims.get(arrow.src));
            if m.shape() != want {
                return Err(Error::validation(format!(
                    "arrow \"{}\": expected a {}x{} matrix, got {}x{}",
                    arrow.id,
                    want.0,
                    want.1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            ensure_finite(m, &format!("arrow \"{}\"", arrow.id))?;
        }
        Ok(Representation { quiver, dims, maps })
    }

    pub fn zero(quiver: Arc<Quiver>, dims: DimensionVector) -> Self {
        let maps = quiver
            .arrows()
            .iter()
            .map(|a| DMatrix::zeros(dims.get(a.dst), dims.get(a.src)))
            .collect();
        Representation { quiver, dims, maps }
    }

    pub fn quiver(&self) -> &Arc<Quiver> {
        &self.quiver
    }

    pub fn dims(&self) -> &DimensionVector {
        &self.dims
    }

    pub fn maps(&self) -> &[ComplexMatrix] {
        &self.maps
    }

    pub fn map(&self, a: usize) -> &ComplexMatrix {
        &self.maps[a]
    }

    /// Replaces the maps, keeping quiver and dimensions. Shapes are
    /// re-validated.
    pub fn with_maps(&self, maps: Vec<ComplexMatrix>) -> Result<Self> {
        Representation::new(self.quiver.clone(), self.dims.clone(), maps)
    }

    /// `T_a -> g_{t(a)} T_a g_{s(a)}^{-1}` for per-vertex `g` and its inverse.
    pub fn transform(&self, g: &[ComplexMatrix], g_inv: &[ComplexMatrix]) -> Representation {
        let maps = self
            .quiver
            .arrows()
            .iter()
            .zip(&self.maps)
            .map(|(a, t)| &g[a.dst] * t * &g_inv[a.src])
            .collect();
        Representation {
            quiver: self.quiver.clone(),
            dims: self.dims.clone(),
            maps,
        }
    }
}

/// i.i.d. standard complex Gaussian arrow maps, deterministic in `seed`.
pub fn random_representation(q: &Arc<Quiver>, d: &DimensionVector, seed: u64) -> Representation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let maps = q
        .arrows()
        .iter()
        .map(|a| random_complex(d.get(a.dst), d.get(a.src), &mut rng))
        .collect();
    Representation {
        quiver: q.clone(),
        dims: d.clone(),
        maps,
    }
}

/// Block-diagonal sum; `r1` occupies the leading block at every vertex.
pub fn direct_sum(r1: &Representation, r2: &Representation) -> Result<Representation> {
    if r1.quiver != r2.quiver && *r1.quiver != *r2.quiver {
        return Err(Error::validation("direct sum of representations of different quivers"));
    }
    let dims = r1.dims.add(&r2.dims);
    let maps = r1
        .maps
        .iter()
        .zip(&r2.maps)
        .map(|(a, b)| block_diag(a, b))
        .collect();
    Ok(Representation {
        quiver: r1.quiver.clone(),
        dims,
        maps,
    })
}

pub(crate) fn block_diag(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

// ---------------------------------------------------------------------------
// JSON problem format

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Decodes a matrix with an expected shape; `what` names it in errors.
pub fn matrix_from_json(raw: &MatrixJson, rows: usize, cols: usize, what: &str) -> Result<ComplexMatrix> {
    let shape_err = || {
        Error::validation(format!(
            "{what}: expected a {rows}x{cols} matrix, got {} rows",
            raw.len()
        ))
    };
    if raw.len() != rows {
        return Err(shape_err());
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, row) in raw.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::validation(format!(
                "{what}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = c64(z[0], z[1]);
        }
    }
    ensure_finite(&m, what)?;
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrowJson {
    id: String,
    src: String,
    dst: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecJson {
    vertices: Vec<String>,
    arrows: Vec<ArrowJson>,
    dims: BTreeMap<String, usize>,
    eta: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rep: Option<BTreeMap<String, MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metric: Option<BTreeMap<String, MatrixJson>>,
}

/// A validated quiver problem instance.
#[derive(Debug, Clone)]
pub struct QuiverProblem {
    pub quiver: Arc<Quiver>,
    pub dims: DimensionVector,
    pub eta: StabilityParams,
    pub rep: Option<Representation>,
    /// Per-vertex metric; vertices absent from the file get the identity.
    pub metric: Option<Vec<PositiveDefiniteMatrix>>,
    /// `Σ η_v d_v` as computed at parse time.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept a nonzero slope sum instead of rejecting it.
    pub allow_nonzero_slope: bool,
}

pub fn parse_quiver_spec(text: &str) -> Result<QuiverProblem> {
    parse_quiver_spec_with(text, ParseOptions::default())
}

pub fn parse_quiver_spec_with(text: &str, opts: ParseOptions) -> Result<QuiverProblem> {
    let raw: SpecJson = serde_json::from_str(text)?;
    let quiver = Arc::new(Quiver::new(
        raw.vertices.iter().cloned(),
        raw.arrows
            .iter()
            .map(|a| (a.id.clone(), a.src.clone(), a.dst.clone())),
    )?);

    let per_vertex = |map_keys: Vec<&String>, what: &str| -> Result<()> {
        for k in &map_keys {
            if quiver.vertex_index(k).is_none() {
                return Err(Error::validation(format!("{what}: unknown vertex \"{k}\"")));
            }
        }
        Ok(())
    };
    per_vertex(raw.dims.keys().collect(), "dims")?;
    per_vertex(raw.eta.keys().collect(), "eta")?;

    let mut dims = Vec::with_capacity(quiver.num_vertices());
    let mut eta = Vec::with_capacity(quiver.num_vertices());
    for v in quiver.vertices() {
        dims.push(
            *raw.dims
                .get(v)
                .ok_or_else(|| Error::validation(format!("dims: missing vertex \"{v}\"")))?,
        );
        eta.push(
            *raw.eta
                .get(v)
                .ok_or_else(|| Error::validation(format!("eta: missing vertex \"{v}\"")))?,
        );
    }
    let dims = DimensionVector::new(&quiver, dims)?;
    let eta = StabilityParams::new(eta)?;
    let slope = eta.slope(&dims);
    if !opts.allow_nonzero_slope {
        validate_slope(&eta, &dims)?;
    }

    let rep = match &raw.rep {
        None => None,
        Some(map) => {
            for k in map.keys() {
                if quiver.arrow_index(k).is_none() {
                    return Err(Error::validation(format!("rep: unknown arrow \"{k}\"")));
                }
            }
            let mut maps = Vec::with_capacity(quiver.num_arrows());
            for a in quiver.arrows() {
                let m = map
                    .get(&a.id)
                    .ok_or_else(|| Error::validation(format!("rep: missing arrow \"{}\"", a.id)))?;
                maps.push(matrix_from_json(
                    m,
                    dims.get(a.dst),
                    dims.get(a.src),
                    &format!("arrow \"{}\"", a.id),
                )?);
            }
            Some(Representation::new(quiver.clone(), dims.clone(), maps)?)
        }
    };

    let metric = match &raw.metric {
        None => None,
        Some(map) => {
            per_vertex(map.keys().collect(), "metric")?;
            let mut blocks = Vec::with_capacity(quiver.num_vertices());
            for (i, v) in quiver.vertices().iter().enumerate() {
                let n = dims.get(i);
                blocks.push(match map.get(v) {
                    None => PositiveDefiniteMatrix::identity(n),
                    Some(m) => {
                        let what = format!("metric at vertex \"{v}\"");
                        PositiveDefiniteMatrix::new(matrix_from_json(m, n, n, &what)?).map_err(
                            |e| Error::validation(format!("{what}: {e}")),
                        )?
                    }
                });
            }
            Some(blocks)
        }
    };

    Ok(QuiverProblem {
        quiver,
        dims,
        eta,
        rep,
        metric,
        slope,
    })
}

/// Canonical JSON form; parsing it back yields the same problem.
pub fn serialize_quiver_spec(p: &QuiverProblem) -> String {
    let q = &p.quiver;
    let by_vertex = |f: &dyn Fn(usize) -> usize| -> BTreeMap<String, usize> {
        q.vertices().iter().enumerate().map(|(i, v)| (v.clone(), f(i))).collect()
    };
    let raw = SpecJson {
        vertices: q.vertices().to_vec(),
        arrows: q
            .arrows()
            .iter()
            .map(|a| ArrowJson {
                id: a.id.clone(),
                src: q.vertices()[a.src].clone(),
                dst: q.vertices()[a.dst].clone(),
            })
            .collect(),
        dims: by_vertex(&|i| p.dims.get(i)),
        eta: q
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), p.eta.get(i)))
            .collect(),
        rep: p.rep.as_ref().map(|r| {
            q.arrows()
                .iter()
                .zip(r.maps())
                .map(|(a, m)| (a.id.clone(), matrix_to_json(m)))
                .collect()
        }),
        metric: p.metric.as_ref().map(|blocks| {
            q.vertices()
                .iter()
                .zip(blocks)
                .map(|(v, h)| (v.clone(), matrix_to_json(h.as_matrix())))
                .collect()
        }),
    };
    serde_json::to_string_pretty(&raw).expect("problem serialization cannot fail")
}
