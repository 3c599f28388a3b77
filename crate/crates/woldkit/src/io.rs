//! JSON problem files and report payloads.
//!
//! One fixed interchange format covers every object the tool reads or
//! writes. The conventions, shared by all fragments:
//!
//! * complex numbers are `[re, im]` pairs;
//! * matrices are flat row-major arrays of complex entries, their shapes
//!   inferred from context (a `σ`-image is `dim × dim`, a tilde map is
//!   `dim × d·dim`, a flip for the pair `(i, j)` is `d_j d_i × d_i d_j`);
//! * matrix units are keyed `"b,p,q"` and inner products `"p,q"`, both
//!   1-based; flips are keyed `"i,j"` with `i > j`, 1-based;
//! * multi-indices are plain arrays; multiplicity vectors are arrays whose
//!   entries are numbers or the string `"inf"`;
//! * direction sets are rendered `"{1,3}"`, 1-based, `"{}"` when empty.
//!
//! A problem file carries an algebra, its correspondences and flips, and
//! optionally a covariant representation, a default truncation, tolerance
//! overrides and a seed. Windowed representations additionally record the
//! per-basis-vector grading so the window is reproducible; a `truncation`
//! without a `grading` array is rejected rather than guessed.
//!
//! Reports are deterministic for a fixed input, seed and version: all maps
//! serialize with sorted keys and the only nondeterministic field, the
//! timing, is ignored by [`canonical_report_string`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corr::Correspondence;
use crate::cstar::{AlgebraElement, AlgebraRep, ExtNat, FinCStarAlgebra, MultiplicityVector};
use crate::extend::ExtensionCertificate;
use crate::numlin::TolerancePolicy;
use crate::prodsys::ProductSystem;
use crate::reps::{CovariantRep, RepClass, Window};
use crate::wold::{DecompositionMode, DecompositionReport};
use crate::{C, CMatrix, Error, Real, Result, ValidationReport};

/// A matrix as a flat row-major list of `[re, im]` entries.
pub type JsonMatrix = Vec<[f64; 2]>;

/// The coefficient algebra `⊕_b M_{n_b}` as its block dimension list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraJson {
    /// Block dimensions `[n_1, …, n_s]`.
    pub blocks: Vec<usize>,
}

/// A representation of the algebra by matrix-unit images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepJson {
    /// Dimension of the represented space.
    pub dim: usize,
    /// Images of the matrix units, keyed `"b,p,q"` (1-based).
    pub units: BTreeMap<String, JsonMatrix>,
}

/// A correspondence presented by its right action, left action and inner
/// products on a fixed spanning family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceJson {
    /// Number of spanning vectors.
    pub dim: usize,
    /// Right action of each matrix unit, keyed `"b,p,q"` (1-based).
    pub right: BTreeMap<String, JsonMatrix>,
    /// Left action of each matrix unit, keyed `"b,p,q"` (1-based).
    pub left: BTreeMap<String, JsonMatrix>,
    /// Inner products `⟨e_p, e_q⟩` as algebra elements (a matrix per
    /// block), keyed `"p,q"` (1-based).
    pub inner: BTreeMap<String, Vec<JsonMatrix>>,
}

/// A level window: the realized bound and the grading of the basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationJson {
    /// Largest realized total level.
    pub levels: usize,
    /// Grading level of each basis vector of the carrier space; required to
    /// reconstruct the window of a stored representation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<Vec<usize>>,
}

/// A covariant representation: the coefficient representation, one tilde
/// map per direction on the algebraic coordinates of the stored
/// correspondences, and the window when the carrier space is a truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariantRepJson {
    /// The coefficient representation `σ`.
    pub sigma: RepJson,
    /// Tilde maps, `dim × d_i·dim` each.
    #[serde(rename = "T")]
    pub tmaps: Vec<JsonMatrix>,
    /// The level window, or `null` for an untruncated representation.
    pub truncation: Option<TruncationJson>,
}

/// Per-file tolerance overrides; absent fields keep the defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ToleranceJson {
    /// Absolute residual tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    /// Relative rank cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_rel: Option<f64>,
    /// Iteration cap for stabilized limits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

/// A complete problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    /// The coefficient algebra.
    pub algebra: AlgebraJson,
    /// The correspondences `E_1, …, E_k`.
    pub correspondences: Vec<CorrespondenceJson>,
    /// Flip matrices keyed `"i,j"` (1-based, `i > j`); empty for `k = 1`.
    #[serde(default)]
    pub flips: BTreeMap<String, JsonMatrix>,
    /// The covariant representation, when the file carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<CovariantRepJson>,
    /// Default truncation bound for commands that build carrier spaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationJson>,
    /// Tolerance overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceJson>,
    /// Seed echoed into reports for reproducibility of sampled checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A rendered report: command echo, version, effective tolerances, the
/// per-command payload, a flat residual table and the elapsed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// The command line that produced the report.
    pub command: String,
    /// Tool version.
    pub version: String,
    /// Effective tolerance policy after all overrides.
    pub tolerance: Value,
    /// Per-command payload.
    pub results: Value,
    /// Headline residuals by name.
    pub residuals: BTreeMap<String, f64>,
    /// Elapsed wall-clock milliseconds (ignored by canonical comparisons).
    pub timing_ms: f64,
}

impl Report {
    /// A report shell for the given command and effective policy.
    pub fn new<T: Real>(command: impl Into<String>, pol: &TolerancePolicy<T>) -> Self {
        Report {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            tolerance: policy_json(pol),
            results: Value::Null,
            residuals: BTreeMap::new(),
            timing_ms: 0.0,
        }
    }
}

/// Pretty-prints a report with the timing field zeroed, so equal inputs
/// produce byte-identical output.
pub fn canonical_report_string(report: &Report) -> Result<String> {
    let mut copy = report.clone();
    copy.timing_ms = 0.0;
    serde_json::to_string_pretty(&copy).map_err(|e| Error::Parse(e.to_string()))
}

/// The effective tolerance policy as a JSON object.
pub fn policy_json<T: Real>(pol: &TolerancePolicy<T>) -> Value {
    json!({
        "abs_tol": pol.abs_tol.to_f64(),
        "rank_rel": pol.rank_rel.to_f64(),
        "max_iterations": pol.max_iterations,
    })
}

/// Applies file-level overrides to a policy.
pub fn apply_overrides<T: Real>(
    pol: &TolerancePolicy<T>,
    overrides: Option<&ToleranceJson>,
) -> Result<TolerancePolicy<T>> {
    let mut out = pol.clone();
    if let Some(o) = overrides {
        if let Some(t) = o.abs_tol {
            out.abs_tol = T::from_f64(t)
                .ok_or_else(|| Error::Parse(format!("abs_tol override {t} is not representable")))?;
        }
        if let Some(t) = o.rank_rel {
            out.rank_rel = T::from_f64(t)
                .ok_or_else(|| Error::Parse(format!("rank_rel override {t} is not representable")))?;
        }
        if let Some(n) = o.max_iterations {
            out.max_iterations = n;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scalars, matrices and keys
// ---------------------------------------------------------------------------

fn c_to_pair<T: Real>(z: C<T>) -> [f64; 2] {
    [
        z.re.to_f64().unwrap_or(f64::NAN),
        z.im.to_f64().unwrap_or(f64::NAN),
    ]
}

fn pair_to_c<T: Real>(p: [f64; 2], context: &str) -> Result<C<T>> {
    let re = T::from_f64(p[0]);
    let im = T::from_f64(p[1]);
    match (re, im) {
        (Some(re), Some(im)) => Ok(C::new(re, im)),
        _ => Err(Error::Parse(format!(
            "entry [{}, {}] in {context} is not representable",
            p[0], p[1]
        ))),
    }
}

/// A matrix as its flat row-major complex entry list.
pub fn matrix_to_json<T: Real>(m: &CMatrix<T>) -> JsonMatrix {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(c_to_pair(m[(r, c)]));
        }
    }
    out
}

/// Rebuilds a matrix of known shape from its flat row-major entry list.
pub fn matrix_from_json<T: Real>(
    rows: usize,
    cols: usize,
    data: &JsonMatrix,
    context: &str,
) -> Result<CMatrix<T>> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            expected: format!("{rows}x{cols} = {} entries", rows * cols),
            found: format!("{}", data.len()),
        });
    }
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = pair_to_c(data[r * cols + c], context)?;
        }
    }
    Ok(m)
}

/// Formats 0-based indices as a 1-based comma key.
fn index_key(parts: &[usize]) -> String {
    parts
        .iter()
        .map(|p| (p + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses a 1-based comma key of fixed arity back to 0-based indices.
fn parse_key(key: &str, arity: usize, context: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != arity {
        return Err(Error::Parse(format!(
            "key '{key}' in {context} needs {arity} comma-separated indices"
        )));
    }
    parts
        .iter()
        .map(|p| {
            let v: usize = p
                .parse()
                .map_err(|_| Error::Parse(format!("key '{key}' in {context} is not numeric")))?;
            if v == 0 {
                return Err(Error::Parse(format!(
                    "key '{key}' in {context} uses 1-based indices"
                )));
            }
            Ok(v - 1)
        })
        .collect()
}

/// The JSON direction-set label: 1-based `{1,3}`, `{}` when empty.
pub fn direction_set_key(dirs: &[usize]) -> String {
    let inner: Vec<String> = dirs.iter().map(|d| (d + 1).to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

// ---------------------------------------------------------------------------
// Algebra, elements, representations
// ---------------------------------------------------------------------------

/// The algebra fragment.
pub fn algebra_to_json(algebra: &FinCStarAlgebra) -> AlgebraJson {
    AlgebraJson {
        blocks: algebra.block_dims().to_vec(),
    }
}

/// Rebuilds the algebra from its fragment.
pub fn algebra_from_json(json: &AlgebraJson) -> Result<FinCStarAlgebra> {
    FinCStarAlgebra::new(json.blocks.clone())
}

/// An algebra element as one flat matrix per block.
pub fn element_to_json<T: Real>(el: &AlgebraElement<T>) -> Vec<JsonMatrix> {
    el.blocks().iter().map(matrix_to_json).collect()
}

/// Rebuilds an algebra element from its per-block matrices.
pub fn element_from_json<T: Real>(
    algebra: &FinCStarAlgebra,
    blocks: &[JsonMatrix],
    context: &str,
) -> Result<AlgebraElement<T>> {
    if blocks.len() != algebra.num_blocks() {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            expected: format!("{} blocks", algebra.num_blocks()),
            found: format!("{}", blocks.len()),
        });
    }
    let data = algebra
        .block_dims()
        .iter()
        .zip(blocks)
        .map(|(&n, flat)| matrix_from_json(n, n, flat, context))
        .collect::<Result<Vec<_>>>()?;
    AlgebraElement::new(algebra.clone(), data)
}

/// The representation fragment of an algebra representation.
pub fn algebra_rep_to_json<T: Real>(rep: &AlgebraRep<T>) -> RepJson {
    let units = rep
        .algebra()
        .unit_indices()
        .map(|(b, p, q)| {
            (
                index_key(&[b, p, q]),
                matrix_to_json(rep.unit_image(b, p, q)),
            )
        })
        .collect();
    RepJson {
        dim: rep.space_dim(),
        units,
    }
}

/// Reads every matrix-unit image of an algebra out of a keyed map.
fn unit_map_from_json<T: Real>(
    algebra: &FinCStarAlgebra,
    map: &BTreeMap<String, JsonMatrix>,
    rows: usize,
    cols: usize,
    context: &str,
) -> Result<Vec<CMatrix<T>>> {
    if map.len() != algebra.dim() {
        return Err(Error::Parse(format!(
            "{context} lists {} matrix units, the algebra has {}",
            map.len(),
            algebra.dim()
        )));
    }
    let dims = algebra.block_dims();
    let mut out = Vec::with_capacity(algebra.dim());
    for (b, p, q) in algebra.unit_indices() {
        let key = index_key(&[b, p, q]);
        let flat = map.get(&key).ok_or_else(|| {
            Error::Parse(format!("{context} is missing the matrix unit key '{key}'"))
        })?;
        if b >= dims.len() || p >= dims[b] || q >= dims[b] {
            return Err(Error::Parse(format!(
                "{context} key '{key}' is outside the algebra"
            )));
        }
        out.push(matrix_from_json(
            rows,
            cols,
            flat,
            &format!("{context}['{key}']"),
        )?);
    }
    Ok(out)
}

/// Rebuilds an algebra representation from its fragment.
pub fn algebra_rep_from_json<T: Real>(
    algebra: &FinCStarAlgebra,
    json: &RepJson,
) -> Result<AlgebraRep<T>> {
    let images = unit_map_from_json(algebra, &json.units, json.dim, json.dim, "representation units")?;
    AlgebraRep::new(algebra.clone(), json.dim, images)
}

// ---------------------------------------------------------------------------
// Correspondences, systems, covariant representations
// ---------------------------------------------------------------------------

/// The correspondence fragment.
pub fn correspondence_to_json<T: Real>(corr: &Correspondence<T>) -> CorrespondenceJson {
    let algebra = corr.algebra();
    let mut right = BTreeMap::new();
    let mut left = BTreeMap::new();
    for (b, p, q) in algebra.unit_indices() {
        right.insert(index_key(&[b, p, q]), matrix_to_json(corr.right_unit(b, p, q)));
        left.insert(index_key(&[b, p, q]), matrix_to_json(corr.left_unit(b, p, q)));
    }
    let mut inner = BTreeMap::new();
    for p in 0..corr.dim() {
        for q in 0..corr.dim() {
            inner.insert(index_key(&[p, q]), element_to_json(corr.inner(p, q)));
        }
    }
    CorrespondenceJson {
        dim: corr.dim(),
        right,
        left,
        inner,
    }
}

/// Rebuilds a correspondence from its fragment.
pub fn correspondence_from_json<T: Real>(
    algebra: &FinCStarAlgebra,
    json: &CorrespondenceJson,
) -> Result<Correspondence<T>> {
    let d = json.dim;
    let right = unit_map_from_json(algebra, &json.right, d, d, "correspondence right action")?;
    let left = unit_map_from_json(algebra, &json.left, d, d, "correspondence left action")?;
    if json.inner.len() != d * d {
        return Err(Error::Parse(format!(
            "correspondence inner products list {} pairs, expected {}",
            json.inner.len(),
            d * d
        )));
    }
    let mut inner = Vec::with_capacity(d * d);
    for p in 0..d {
        for q in 0..d {
            let key = index_key(&[p, q]);
            let blocks = json.inner.get(&key).ok_or_else(|| {
                Error::Parse(format!("correspondence inner products are missing key '{key}'"))
            })?;
            inner.push(element_from_json(
                algebra,
                blocks,
                &format!("inner['{key}']"),
            )?);
        }
    }
    Correspondence::new(algebra.clone(), d, right, left, inner)
}

/// The representation fragment of a covariant representation.
///
/// The tilde maps are written on the algebraic coordinates of the stored
/// correspondences; a window is written as its bound plus the grading of
/// the carrier basis. Compressed windows (from restrictions) carry no
/// grading and cannot be serialized.
pub fn covariant_to_json<T: Real>(rep: &CovariantRep<T>) -> Result<CovariantRepJson> {
    let tmaps = (0..rep.k()).map(|i| matrix_to_json(rep.tmap_alg(i))).collect();
    let truncation = match rep.window() {
        None => None,
        Some(w) => {
            let grading = w.levels().ok_or_else(|| {
                Error::Unsupported(
                    "cannot serialize a representation whose window was compressed away from its basis"
                        .into(),
                )
            })?;
            Some(TruncationJson {
                levels: w.bound(),
                grading: Some(grading.to_vec()),
            })
        }
    };
    Ok(CovariantRepJson {
        sigma: algebra_rep_to_json(rep.sigma()),
        tmaps,
        truncation,
    })
}

/// A problem file for a product system and an optional representation.
///
/// The correspondences are emitted in the system's internal orthonormal
/// presentation and the flips on the matching coordinates, so the file
/// reproduces the system exactly up to the (deterministic) re-presentation
/// performed on load.
pub fn problem_to_json<T: Real>(
    system: &ProductSystem<T>,
    rep: Option<&CovariantRep<T>>,
) -> Result<ProblemFile> {
    let correspondences = (0..system.k())
        .map(|i| correspondence_to_json(system.corr(i)))
        .collect();
    let mut flips = BTreeMap::new();
    for i in 0..system.k() {
        for j in 0..i {
            let t = system
                .flip_alg(i, j)
                .ok_or_else(|| Error::InvalidStructure(format!("missing flip ({i},{j})")))?;
            flips.insert(index_key(&[i, j]), matrix_to_json(t));
        }
    }
    Ok(ProblemFile {
        algebra: algebra_to_json(system.algebra()),
        correspondences,
        flips,
        representation: rep.map(covariant_to_json).transpose()?,
        truncation: None,
        tolerance: None,
        seed: None,
    })
}

/// Rebuilds the product system and the representation of a problem file.
pub fn problem_from_json<T: Real>(
    file: &ProblemFile,
    pol: &TolerancePolicy<T>,
) -> Result<(ProductSystem<T>, Option<CovariantRep<T>>)> {
    let algebra = algebra_from_json(&file.algebra)?;
    let corrs = file
        .correspondences
        .iter()
        .map(|c| correspondence_from_json(&algebra, c))
        .collect::<Result<Vec<_>>>()?;
    let k = corrs.len();
    let dims: Vec<usize> = corrs.iter().map(|c| c.dim()).collect();
    let mut flips = Vec::new();
    for (key, flat) in &file.flips {
        let idx = parse_key(key, 2, "flips")?;
        let (i, j) = (idx[0], idx[1]);
        if i >= k || j >= k || i <= j {
            return Err(Error::Parse(format!(
                "flip key '{key}' must name a pair i > j of the {k} directions"
            )));
        }
        flips.push((
            (i, j),
            matrix_from_json(
                dims[j] * dims[i],
                dims[i] * dims[j],
                flat,
                &format!("flips['{key}']"),
            )?,
        ));
    }
    let system = ProductSystem::new(corrs, flips, pol)?;
    let rep = match &file.representation {
        None => None,
        Some(r) => Some(covariant_from_json(&system, r, pol)?),
    };
    Ok((system, rep))
}

/// Rebuilds a covariant representation against an already-loaded system.
pub fn covariant_from_json<T: Real>(
    system: &ProductSystem<T>,
    json: &CovariantRepJson,
    pol: &TolerancePolicy<T>,
) -> Result<CovariantRep<T>> {
    let algebra = system.algebra();
    let sigma = algebra_rep_from_json::<T>(algebra, &json.sigma)?;
    let h = sigma.space_dim();
    if json.tmaps.len() != system.k() {
        return Err(Error::DimensionMismatch {
            context: "representation tilde maps".into(),
            expected: format!("{}", system.k()),
            found: format!("{}", json.tmaps.len()),
        });
    }
    let mut tmaps = Vec::with_capacity(system.k());
    for (i, flat) in json.tmaps.iter().enumerate() {
        let d = system.input_space(i).ambient_dim();
        tmaps.push(matrix_from_json(h, d * h, flat, &format!("T[{i}]"))?);
    }
    let window = match &json.truncation {
        None => None,
        Some(t) => {
            let grading = t.grading.as_ref().ok_or_else(|| {
                Error::Parse(
                    "truncation requires the per-vector 'grading' array to reconstruct the window"
                        .into(),
                )
            })?;
            if grading.len() != h {
                return Err(Error::DimensionMismatch {
                    context: "truncation grading".into(),
                    expected: format!("{h} levels"),
                    found: format!("{}", grading.len()),
                });
            }
            Some(Window::from_levels(grading, t.levels))
        }
    };
    CovariantRep::new(system.clone(), sigma, tmaps, window, pol)
}

// ---------------------------------------------------------------------------
// Parsing with pointer paths
// ---------------------------------------------------------------------------

/// Parses a problem file, reporting the JSON pointer path on failure.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    parse_with_path(text)
}

/// Parses a standalone representation fragment (for `--pi` files),
/// reporting the JSON pointer path on failure.
pub fn parse_rep_file(text: &str) -> Result<RepJson> {
    parse_with_path(text)
}

fn parse_with_path<D: for<'de> Deserialize<'de>>(text: &str) -> Result<D> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Parse(format!("{} (at {})", e.inner(), e.path())))
}

/// Pretty-prints any serializable artifact.
pub fn to_json_string<S: Serialize>(value: &S) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

// ---------------------------------------------------------------------------
// Report payloads
// ---------------------------------------------------------------------------

fn f<T: Real>(x: T) -> Value {
    json!(x.to_f64())
}

/// A multiplicity vector as an array of numbers and `"inf"` strings.
pub fn multiplicity_to_json(m: &MultiplicityVector) -> Value {
    Value::Array(
        m.entries()
            .iter()
            .map(|e| match e {
                ExtNat::Fin(n) => json!(n),
                ExtNat::Inf => json!("inf"),
            })
            .collect(),
    )
}

/// Parses a multiplicity vector from its array form.
pub fn multiplicity_from_json(v: &Value) -> Result<MultiplicityVector> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse("multiplicity vector must be an array".into()))?;
    let entries = arr
        .iter()
        .map(|e| {
            if let Some(n) = e.as_u64() {
                Ok(ExtNat::Fin(n))
            } else if e.as_str() == Some("inf") {
                Ok(ExtNat::Inf)
            } else {
                Err(Error::Parse(format!(
                    "multiplicity entry {e} must be a natural number or \"inf\""
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiplicityVector::new(entries))
}

/// A validation report as a payload object.
pub fn validation_json(report: &ValidationReport) -> Value {
    json!({
        "context": report.context,
        "checks_run": report.checks_run,
        "max_residual": report.max_residual,
        "passed": report.passed(),
        "violations": report.violations.iter().map(|v| json!({
            "name": v.name,
            "residual": v.residual,
            "tol": v.tol,
        })).collect::<Vec<_>>(),
    })
}

/// A classification as a payload object (pair indices 1-based).
pub fn classification_json<T: Real>(class: &RepClass<T>) -> Value {
    let verdicts = |vs: &[crate::reps::Verdict<T>]| {
        vs.iter()
            .map(|v| json!({"holds": v.holds, "residual": f(v.residual)}))
            .collect::<Vec<_>>()
    };
    json!({
        "is_isometric": class.is_isometric,
        "is_fully_coisometric": class.is_fully_coisometric,
        "is_doubly_commuting": class.is_doubly_commuting,
        "isometric": verdicts(&class.isometric),
        "fully_coisometric": verdicts(&class.fully_coisometric),
        "doubly_commuting": class.doubly_commuting.iter().map(|v| json!({
            "i": v.i + 1,
            "j": v.j + 1,
            "holds": v.holds,
            "residual": f(v.residual),
        })).collect::<Vec<_>>(),
    })
}

/// A decomposition report as a payload object.
///
/// Summands are keyed by their 1-based direction-set label; each carries
/// its dimension and residuals, the wandering multiplicity when an induced
/// certificate exists, and (on request) the full projection matrix.
pub fn decomposition_json<T: Real>(
    report: &DecompositionReport<T>,
    emit_projections: bool,
) -> Value {
    let mode = match report.mode {
        DecompositionMode::DoublyCommuting => "dc",
        DecompositionMode::General => "general",
        DecompositionMode::WeaklyInduced => "weak",
    };
    let mut summands = serde_json::Map::new();
    for s in &report.summands {
        let mut residuals = serde_json::Map::new();
        residuals.insert("reducing".into(), f(s.reducing_residual));
        residuals.insert("coisometry".into(), f(s.coisometry_residual));
        if let Some(cert) = &s.certificate {
            residuals.insert("unitary".into(), f(cert.unitary_residual));
            residuals.insert("intertwining".into(), f(cert.intertwining_residual));
        }
        let mut entry = serde_json::Map::new();
        entry.insert("dim".into(), json!(s.projection.rank()));
        entry.insert("residuals".into(), Value::Object(residuals));
        if let Some(cert) = &s.certificate {
            entry.insert("multiplicity".into(), multiplicity_to_json(&cert.multiplicity));
            entry.insert("level_bound".into(), json!(cert.level_bound));
        }
        if emit_projections {
            entry.insert(
                "projection".into(),
                json!(matrix_to_json(s.projection.matrix())),
            );
        }
        summands.insert(direction_set_key(&s.alpha), Value::Object(entry));
    }
    let mut out = serde_json::Map::new();
    out.insert("mode".into(), json!(mode));
    out.insert("summands".into(), Value::Object(summands));
    if !report.weak_parts.is_empty() {
        let mut parts = serde_json::Map::new();
        for part in &report.weak_parts {
            parts.insert(
                direction_set_key(&part.gamma),
                json!({
                    "kernel_meet_dim": part.kernel_meet.rank(),
                    "residuals": {
                        "unitary": f(part.certificate.unitary_residual),
                        "intertwining": f(part.certificate.intertwining_residual),
                    },
                }),
            );
        }
        out.insert("weak_parts".into(), Value::Object(parts));
    }
    out.insert("residual_sum".into(), f(report.residual_sum));
    out.insert(
        "orthogonality_residual".into(),
        f(report.orthogonality_residual),
    );
    out.insert("p_infty_gap".into(), f(report.p_infty_gap));
    out.insert("checks".into(), validation_json(&report.checks));
    Value::Object(out)
}

/// An extension certificate as a payload object.
pub fn extension_json(cert: &ExtensionCertificate) -> Value {
    json!({
        "outcome": cert.outcome.to_string(),
        "m_prime": cert.m_prime.as_ref().map(multiplicity_to_json),
        "infinite_support": cert.infinite_support,
        "bound": cert.bound,
        "notes": cert.notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::identity_correspondence;
    use crate::models::{
        graph_rep, graph_system, twisted_shift, GraphEdge, GraphSpec, TwistedShiftSpec,
    };
    use crate::numlin::op_norm;
    use crate::wold::wold_dc;

    const TOL: f64 = 1e-9;

    fn pol() -> TolerancePolicy<f64> {
        TolerancePolicy::default()
    }

    #[test]
    fn matrices_round_trip_exactly_through_json_text() {
        let m = CMatrix::<f64>::from_fn(3, 2, |r, c| {
            C::new(0.1 + r as f64 * 1.7, -0.3 + c as f64 / 3.0)
        });
        let flat = matrix_to_json(&m);
        let text = serde_json::to_string(&flat).unwrap();
        let parsed: JsonMatrix = serde_json::from_str(&text).unwrap();
        let back = matrix_from_json::<f64>(3, 2, &parsed, "test").unwrap();
        assert_eq!(m, back);
        assert!(matrix_from_json::<f64>(2, 2, &parsed, "test").is_err());
    }

    #[test]
    fn keys_are_one_based_and_validated() {
        assert_eq!(index_key(&[1, 0, 2]), "2,1,3");
        assert_eq!(parse_key("2,1,3", 3, "t").unwrap(), vec![1, 0, 2]);
        assert!(parse_key("0,1", 2, "t").is_err());
        assert!(parse_key("1", 2, "t").is_err());
        assert!(parse_key("a,b", 2, "t").is_err());
        assert_eq!(direction_set_key(&[]), "{}");
        assert_eq!(direction_set_key(&[0, 2]), "{1,3}");
    }

    #[test]
    fn algebra_representation_fragment_round_trips() {
        let algebra = FinCStarAlgebra::new(vec![2, 1]).unwrap();
        let rep = algebra.defining_rep::<f64>();
        let json = algebra_rep_to_json(&rep);
        assert_eq!(json.dim, 3);
        assert!(json.units.contains_key("1,2,2"));
        assert!(json.units.contains_key("2,1,1"));
        let back = algebra_rep_from_json::<f64>(&algebra, &json).unwrap();
        for (b, p, q) in algebra.unit_indices() {
            assert_eq!(back.unit_image(b, p, q), rep.unit_image(b, p, q));
        }
        // A missing unit key is rejected.
        let mut broken = json.clone();
        broken.units.remove("1,2,2");
        assert!(algebra_rep_from_json::<f64>(&algebra, &broken).is_err());
    }

    #[test]
    fn correspondence_fragment_round_trips_and_revalidates() {
        let algebra = FinCStarAlgebra::new(vec![2, 1]).unwrap();
        let corr = identity_correspondence::<f64>(&algebra);
        let json = correspondence_to_json(&corr);
        let back = correspondence_from_json::<f64>(&algebra, &json).unwrap();
        assert!(back.validate(TOL).passed());
        assert_eq!(back.dim(), corr.dim());
        for (b, p, q) in algebra.unit_indices() {
            assert_eq!(back.right_unit(b, p, q), corr.right_unit(b, p, q));
            assert_eq!(back.left_unit(b, p, q), corr.left_unit(b, p, q));
        }
        for p in 0..corr.dim() {
            for q in 0..corr.dim() {
                let diff = back.inner(p, q).add(&corr.inner(p, q).scale(C::new(-1.0, 0.0)));
                assert!(diff.norm().unwrap() < 1e-15);
            }
        }
    }

    #[test]
    fn twisted_shift_problem_round_trips_through_text() {
        let spec = TwistedShiftSpec {
            k: 2,
            phases: vec![((1, 0), C::new(1.0f64.cos(), 1.0f64.sin()))],
            multiplicity: 1,
            bound: 3,
        };
        let rep = twisted_shift(&spec, TOL, &pol()).unwrap();
        let file = problem_to_json(rep.system(), Some(&rep)).unwrap();
        let text = to_json_string(&file).unwrap();
        let parsed = parse_problem(&text).unwrap();
        assert_eq!(parsed, file);
        let (system, back) = problem_from_json::<f64>(&parsed, &pol()).unwrap();
        let back = back.unwrap();
        assert_eq!(system.k(), 2);
        assert_eq!(back.dim_h(), rep.dim_h());
        // Scalar fibers keep their coordinates, so the tilde maps agree
        // exactly and the window survives.
        for i in 0..2 {
            assert!(op_norm(&(back.tmap_alg(i) - rep.tmap_alg(i))).unwrap() < 1e-12);
        }
        assert_eq!(
            back.window().map(|w| w.bound()),
            rep.window().map(|w| w.bound())
        );
        let class = back.classify(TOL).unwrap();
        assert!(class.is_isometric && class.is_doubly_commuting);
        // Re-emission is byte-identical: the loaded presentation is fixed.
        let file2 = problem_to_json(&system, Some(&back)).unwrap();
        assert_eq!(to_json_string(&file2).unwrap(), text);
    }

    #[test]
    fn graph_problem_reports_are_stable_across_a_round_trip() {
        let spec = GraphSpec::single_color(
            2,
            vec![GraphEdge { src: 0, dst: 0 }, GraphEdge { src: 0, dst: 1 }],
        );
        let rep = graph_rep::<f64>(&spec, &[1, 2], TOL, &pol()).unwrap();
        let report = wold_dc(&rep, TOL, &pol()).unwrap();
        let file = problem_to_json(rep.system(), Some(&rep)).unwrap();
        let text = to_json_string(&file).unwrap();
        let (_, back) = problem_from_json::<f64>(&parse_problem(&text).unwrap(), &pol()).unwrap();
        let back = back.unwrap();
        let report2 = wold_dc(&back, TOL, &pol()).unwrap();
        for (a, b) in report.summands.iter().zip(&report2.summands) {
            assert_eq!(a.alpha, b.alpha);
            assert_eq!(a.projection.rank(), b.projection.rank());
            // The projections live on H, which the re-presentation of the
            // fibers does not touch.
            assert!(
                op_norm(&(a.projection.matrix() - b.projection.matrix())).unwrap() < 1e-8
            );
        }
        let payload = decomposition_json(&report2, false);
        assert_eq!(payload["mode"], "dc");
        assert_eq!(payload["summands"]["{}"]["dim"], 2);
        assert_eq!(payload["summands"]["{1}"]["dim"], 1);
        assert!(payload["summands"]["{1}"]["multiplicity"].is_array());
        assert!(payload["summands"]["{1}"].get("projection").is_none());
        let with_proj = decomposition_json(&report2, true);
        let proj = with_proj["summands"]["{1}"]["projection"].as_array().unwrap();
        assert_eq!(proj.len(), rep.dim_h() * rep.dim_h());
    }

    #[test]
    fn malformed_json_errors_carry_the_pointer_path() {
        let err = parse_problem("{\"algebra\": {\"blocks\": \"two\"}}").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("algebra.blocks"), "message: {msg}"),
            other => panic!("expected a parse error, got {other:?}"),
        }
        let err = parse_problem("not json at all").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn truncation_needs_a_grading_of_the_right_length() {
        let spec = TwistedShiftSpec::<f64>::untwisted(1, 1, 2);
        let rep = twisted_shift(&spec, TOL, &pol()).unwrap();
        let mut file = problem_to_json(rep.system(), Some(&rep)).unwrap();
        let trunc = file
            .representation
            .as_mut()
            .unwrap()
            .truncation
            .as_mut()
            .unwrap();
        assert_eq!(trunc.levels, 2);
        assert_eq!(trunc.grading.as_deref(), Some(&[0usize, 1, 2][..]));
        trunc.grading = None;
        let err = problem_from_json::<f64>(&file, &pol()).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let trunc = file
            .representation
            .as_mut()
            .unwrap()
            .truncation
            .as_mut()
            .unwrap();
        trunc.grading = Some(vec![0, 1]);
        let err = problem_from_json::<f64>(&file, &pol()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn multiplicities_round_trip_with_infinite_entries() {
        let m = MultiplicityVector::new(vec![ExtNat::Inf, ExtNat::Fin(3), ExtNat::Fin(0)]);
        let v = multiplicity_to_json(&m);
        assert_eq!(v, json!(["inf", 3, 0]));
        assert_eq!(multiplicity_from_json(&v).unwrap(), m);
        assert!(multiplicity_from_json(&json!([1.5])).is_err());
        assert!(multiplicity_from_json(&json!(["infinity"])).is_err());
        assert!(multiplicity_from_json(&json!("inf")).is_err());
    }

    #[test]
    fn reports_are_byte_identical_modulo_timing() {
        let spec = GraphSpec::single_color(1, vec![GraphEdge { src: 0, dst: 0 }]);
        let system = graph_system::<f64>(&spec, &pol()).unwrap();
        let build = |ms: f64| {
            let mut r = Report::new("validate loop.json", &pol());
            r.results = validation_json(&system.validate(TOL));
            r.residuals.insert("max_residual".into(), 0.0);
            r.timing_ms = ms;
            r
        };
        let a = build(1.25);
        let b = build(900.0);
        assert_ne!(to_json_string(&a).unwrap(), to_json_string(&b).unwrap());
        assert_eq!(
            canonical_report_string(&a).unwrap(),
            canonical_report_string(&b).unwrap()
        );
        assert!(a.results["passed"].as_bool().unwrap());
    }

    #[test]
    fn validation_payload_names_the_violated_relation() {
        let mut report = ValidationReport::new("flip unitarity");
        report.check("flip (2,1) unitary", 0.1, 1e-9);
        let v = validation_json(&report);
        assert_eq!(v["passed"], json!(false));
        assert_eq!(v["violations"][0]["name"], json!("flip (2,1) unitary"));
        assert_eq!(v["context"], json!("flip unitarity"));
    }
}
