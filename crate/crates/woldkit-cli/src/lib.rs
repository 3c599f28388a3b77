//! Command line for the correspondence toolkit.
//!
//! Every invocation runs one verb against a JSON problem file (the schema
//! is documented in `docs/schema`) and prints a single report object to
//! stdout. Exit codes:
//!
//! * `0`: the verb ran and its outcome is positive.
//! * `2`: the input is malformed or a structural invariant failed; the
//!   report names the violated relation, and JSON syntax or schema errors
//!   carry a pointer path to the offending field.
//! * `3`: a decision procedure ran to completion with a negative or
//!   undecided outcome (infeasible multiplicity equation, failed
//!   domination check, search bound exhausted).
//! * `1`: an internal numerical failure (iteration cap, non-finite data).
//!
//! The tolerance policy is resolved in order of increasing strength:
//! built-in defaults, the `WOLDKIT_TOL` environment variable (absolute
//! tolerance only), the per-file `tolerance` section, and the `--tol`
//! flag. The effective values are echoed in every report, and the
//! `timing_ms` field is the only part of a report that varies between
//! identical runs.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use woldkit::cstar::{
    multiplicity_vector, rep_from_multiplicities, AlgebraRep, FinCStarAlgebra,
};
use woldkit::extend::{self, InductionMatrix, SolveOutcome};
use woldkit::fock;
use woldkit::io::{self, ProblemFile, Report, ToleranceJson};
use woldkit::models::{
    self, AlgebraAutomorphism, AutomorphismSystemSpec, GraphEdge, GraphSpec, TwistedShiftSpec,
};
use woldkit::numlin::TolerancePolicy;
use woldkit::prodsys::ProductSystem;
use woldkit::reps::{CovariantRep, RepClass, Verdict};
use woldkit::wold;
use woldkit::{CMatrix, Error, Result};

/// Numerical toolkit for Wold decompositions of product systems.
#[derive(Debug, Parser)]
#[command(name = "woldkit", version, about)]
struct Cli {
    /// Absolute tolerance; overrides WOLDKIT_TOL and per-file settings.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check a problem file against every structural invariant.
    Validate {
        /// Problem file.
        file: PathBuf,
    },

    /// Classify the representation: isometric, fully coisometric, doubly
    /// commuting, with one residual per direction or pair.
    Classify {
        /// Problem file carrying a representation.
        file: PathBuf,
    },

    /// Split the representation into maximal reducing summands.
    Decompose {
        /// Problem file carrying a representation.
        file: PathBuf,

        /// dc: Wold decomposition of a doubly commuting isometric
        /// representation; general: all maximal direction-set summands;
        /// weak: the four weakly bi-induced parts (k = 2 or 3).
        #[arg(long, value_enum)]
        mode: DecomposeMode,

        /// Restrict the general mode to one direction set, 1-based and
        /// comma separated ("1,3"); an empty value means the empty set.
        #[arg(long)]
        alpha: Option<String>,

        /// Include the summand projection matrices in the report.
        #[arg(long)]
        emit_projections: bool,
    },

    /// Build the induced (Fock shift) representation of a coefficient
    /// representation on a truncated level window.
    Induce {
        /// Problem file describing the product system.
        file: PathBuf,

        /// JSON file with the coefficient representation fragment.
        #[arg(long)]
        pi: PathBuf,

        /// Total level bound of the truncation window.
        #[arg(long)]
        levels: usize,

        /// Also write a problem file carrying the induced representation.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Decide or materialize unitary extensions of a representation over a
    /// single correspondence.
    Extend {
        /// Problem file with one correspondence and a representation.
        file: PathBuf,

        /// unit2: entrywise domination m <= M(m); eqrep: solve the
        /// multiplicity equation M(m') = m + m'; construct: solve and
        /// build the extension on a window.
        #[arg(long, value_enum)]
        mode: ExtendMode,

        /// Search bound for the finite coordinates of m'.
        #[arg(long, default_value_t = 10_000)]
        bound: u64,

        /// Window bound for the constructed extension.
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },

    /// Emit a model problem file.
    Model {
        #[command(subcommand)]
        family: ModelCmd,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecomposeMode {
    Dc,
    General,
    Weak,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExtendMode {
    Unit2,
    Eqrep,
    Construct,
}

#[derive(Debug, Subcommand)]
enum ModelCmd {
    /// Truncated k-fold shift with scalar coefficients and unimodular
    /// twist phases.
    TwistedShift {
        /// Number of directions.
        #[arg(long, default_value_t = 2)]
        k: usize,

        /// Wandering multiplicity of the shift.
        #[arg(long, default_value_t = 1)]
        multiplicity: usize,

        /// Total level bound of the window.
        #[arg(long, default_value_t = 3)]
        levels: usize,

        /// Seed for random twist phases; omitted means untwisted.
        #[arg(long)]
        seed: Option<u64>,

        /// Write the problem file here as well as to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Automorphism system of a block permutation together with its
    /// induced shift.
    Automorphism {
        /// Algebra block dimensions, comma separated.
        #[arg(long, default_value = "1,1")]
        blocks: String,

        /// Block permutation, 1-based and comma separated.
        #[arg(long, default_value = "2,1")]
        perm: String,

        /// Block multiplicities of the coefficient representation.
        #[arg(long, default_value = "1,1")]
        pi: String,

        /// Total level bound of the window.
        #[arg(long, default_value_t = 3)]
        levels: usize,

        /// Write the problem file here as well as to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// One-color graph correspondence with its vertex-weighted
    /// Cuntz-Krieger representation.
    Graph {
        /// Number of vertices.
        #[arg(long)]
        vertices: usize,

        /// Edges as 1-based "src>dst" pairs separated by semicolons, for
        /// example "1>1;1>2".
        #[arg(long)]
        edges: String,

        /// Vertex weights (fiber dimensions); defaults to all ones.
        #[arg(long)]
        weights: Option<String>,

        /// Write the problem file here as well as to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Reference correspondences with recorded extension-solver outcomes.
    Reference {
        /// Fixture slot.
        #[arg(long, default_value_t = 0)]
        slot: usize,

        /// Write the problem file here as well as to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs one command line and returns the process exit code. The report is
/// printed to stdout; clap usage and help text go to stderr/stdout as
/// usual.
pub fn run<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString>,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let echo = command_echo(&args);
    let cli = match Cli::try_parse_from(args.iter().cloned()) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    let started = Instant::now();
    match dispatch(&cli, &echo) {
        Ok((mut report, code)) => {
            report.timing_ms = started.elapsed().as_secs_f64() * 1e3;
            match io::to_json_string(&report) {
                Ok(text) => {
                    println!("{text}");
                    code
                }
                Err(_) => 1,
            }
        }
        Err(err) => {
            let code = exit_code(&err);
            let mut report = Report::new(echo, &TolerancePolicy::<f64>::default());
            report.results = json!({ "error": err.to_string() });
            report.timing_ms = started.elapsed().as_secs_f64() * 1e3;
            if let Ok(text) = io::to_json_string(&report) {
                println!("{text}");
            }
            code
        }
    }
}

/// The user's arguments joined back into one line, for the report echo.
fn command_echo(args: &[OsString]) -> String {
    args.iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Maps toolkit errors onto exit codes: input and validation problems are
/// `2`, everything else is an internal failure.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_)
        | Error::InvalidStructure(_)
        | Error::DimensionMismatch { .. }
        | Error::FailedChecks { .. }
        | Error::NotAProjection { .. }
        | Error::NotPsd { .. } => 2,
        _ => 1,
    }
}

fn dispatch(cli: &Cli, echo: &str) -> Result<(Report, i32)> {
    let base = base_policy()?;
    match &cli.command {
        Cmd::Validate { file } => cmd_validate(file, &base, cli.tol, echo),
        Cmd::Classify { file } => cmd_classify(file, &base, cli.tol, echo),
        Cmd::Decompose {
            file,
            mode,
            alpha,
            emit_projections,
        } => cmd_decompose(
            file,
            *mode,
            alpha.as_deref(),
            *emit_projections,
            &base,
            cli.tol,
            echo,
        ),
        Cmd::Induce {
            file,
            pi,
            levels,
            out,
        } => cmd_induce(file, pi, *levels, out.as_deref(), &base, cli.tol, echo),
        Cmd::Extend {
            file,
            mode,
            bound,
            levels,
        } => cmd_extend(file, *mode, *bound, *levels, &base, cli.tol, echo),
        Cmd::Model { family } => cmd_model(family, &base, cli.tol, echo),
    }
}

// ---------------------------------------------------------------------------
// Tolerance plumbing and file loading
// ---------------------------------------------------------------------------

/// The built-in defaults with the `WOLDKIT_TOL` environment override.
fn base_policy() -> Result<TolerancePolicy<f64>> {
    let mut pol = TolerancePolicy::default();
    if let Ok(raw) = std::env::var("WOLDKIT_TOL") {
        pol.abs_tol = raw
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("WOLDKIT_TOL is not a number: {raw:?}")))?;
    }
    Ok(pol)
}

/// File overrides beat the environment; the `--tol` flag beats both.
fn effective_policy(
    base: &TolerancePolicy<f64>,
    file: Option<&ToleranceJson>,
    flag: Option<f64>,
) -> Result<TolerancePolicy<f64>> {
    let mut pol = io::apply_overrides(base, file)?;
    if let Some(t) = flag {
        pol.abs_tol = t;
    }
    Ok(pol)
}

/// A parsed problem file together with the policy that applies to it.
struct Loaded {
    file: ProblemFile,
    system: ProductSystem<f64>,
    rep: Option<CovariantRep<f64>>,
    pol: TolerancePolicy<f64>,
}

fn load_problem(path: &Path, base: &TolerancePolicy<f64>, flag: Option<f64>) -> Result<Loaded> {
    let text = read_text(path)?;
    let file = io::parse_problem(&text)?;
    let pol = effective_policy(base, file.tolerance.as_ref(), flag)?;
    let (system, rep) = io::problem_from_json(&file, &pol)?;
    Ok(Loaded {
        file,
        system,
        rep,
        pol,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory so the output
/// appears atomically.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let problem = |e: &dyn std::fmt::Display| {
        Error::Unsupported(format!("cannot write {}: {e}", path.display()))
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| problem(&e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| problem(&e))?;
    tmp.write_all(b"\n").map_err(|e| problem(&e))?;
    tmp.persist(path).map_err(|e| problem(&e.error))?;
    Ok(())
}

fn require_rep(loaded: &Loaded) -> Result<&CovariantRep<f64>> {
    loaded.rep.as_ref().ok_or_else(|| {
        Error::InvalidStructure("the problem file carries no representation".into())
    })
}

fn max_residual(verdicts: &[Verdict<f64>]) -> f64 {
    verdicts.iter().map(|v| v.residual).fold(0.0, f64::max)
}

fn class_residuals(report: &mut Report, class: &RepClass<f64>) {
    report
        .residuals
        .insert("isometric".into(), max_residual(&class.isometric));
    report.residuals.insert(
        "fully_coisometric".into(),
        max_residual(&class.fully_coisometric),
    );
    let dc = class
        .doubly_commuting
        .iter()
        .map(|v| v.residual)
        .fold(0.0, f64::max);
    report.residuals.insert("doubly_commuting".into(), dc);
}

// ---------------------------------------------------------------------------
// validate, classify, decompose
// ---------------------------------------------------------------------------

fn cmd_validate(
    path: &Path,
    base: &TolerancePolicy<f64>,
    flag: Option<f64>,
    echo: &str,
) -> Result<(Report, i32)> {
    let loaded = load_problem(path, base, flag)?;
    let tol = loaded.pol.abs_tol;
    let mut checks = loaded.system.validate(tol);
    if let Some(rep) = &loaded.rep {
        checks.absorb(rep.validate(tol));
    }
    let passed = checks.passed();
    let mut report = Report::new(echo, &loaded.pol);
    report
        .residuals
        .insert("max_violation".into(), checks.max_residual);
    report.results = json!({
        "k": loaded.system.k(),
        "blocks": loaded.system.algebra().block_dims(),
        "dim_h": loaded.rep.as_ref().map(|r| r.dim_h()),
        "validation": io::validation_json(&checks),
    });
    Ok((report, if passed { 0 } else { 2 }))
}

fn cmd_classify(
    path: &Path,
    base: &TolerancePolicy<f64>,
    flag: Option<f64>,
    echo: &str,
) -> Result<(Report, i32)> {
    let loaded = load_problem(path, base, flag)?;
    let rep = require_rep(&loaded)?;
    let class = rep.classify(loaded.pol.abs_tol)?;
    let mut report = Report::new(echo, &loaded.pol);
    class_residuals(&mut report, &class);
    report.results = io::classification_json(&class);
    Ok((report, 0))
}

fn cmd_decompose(
    path: &Path,
    mode: DecomposeMode,
    alpha: Option<&str>,
    emit_projections: bool,
    base: &TolerancePolicy<f64>,
    flag: Option<f64>,
    echo: &str,
) -> Result<(Report, i32)> {
    let loaded = load_problem(path, base, flag)?;
    let rep = require_rep(&loaded)?;
    let tol = loaded.pol.abs_tol;
    let mut report = Report::new(echo, &loaded.pol);

    if let Some(raw) = alpha {
        if !matches!(mode, DecomposeMode::General) {
            return Err(Error::InvalidStructure(
                "--alpha applies to --mode general only".into(),
            ));
        }
        let dirs = parse_direction_set(raw, rep.k())?;
        let (projection, cert) = wold::max_alpha_summand(rep, &dirs, tol, &loaded.pol)?;
        report
            .residuals
            .insert("orthogonality".into(), cert.orthogonality_residual);
        report.residuals.insert(
            "kernel_orthogonality".into(),
            cert.kernel_orthogonality_residual,
        );
        let mut results = json!({
            "mode": "general",
            "alpha": io::direction_set_key(&dirs),
            "dim": projection.rank(),
            "fibers": cert
                .fibers
                .iter()
                .map(|(n, rank)| json!({ "n": n, "rank": rank }))
                .collect::<Vec<_>>(),
            "quantifier_bound": cert.quantifier_bound,
            "residuals": {
                "orthogonality": cert.orthogonality_residual,
                "kernel_orthogonality": cert.kernel_orthogonality_residual,
            },
        });
        if emit_projections {
            results["projection"] = json!(io::matrix_to_json(projection.matrix()));
        }
        report.results = results;
        return Ok((report, 0));
    }

    let dec = match mode {
        DecomposeMode::Dc => wold::wold_dc(rep, tol, &loaded.pol)?,
        DecomposeMode::General => wold::max_doubly_commuting(rep, tol, &loaded.pol)?,
        DecomposeMode::Weak => wold::weakly_induced_decompose(rep, tol, &loaded.pol)?,
    };
    report
        .residuals
        .insert("residual_sum".into(), dec.residual_sum);
    report
        .residuals
        .insert("orthogonality".into(), dec.orthogonality_residual);
    report
        .residuals
        .insert("p_infty_gap".into(), dec.p_infty_gap);
    report.results = io::decomposition_json(&dec, emit_projections);
    Ok((report, 0))
}

/// Parses a 1-based comma-separated direction set like "1,3" (braces
/// optional, empty means the empty set) into sorted 0-based indices.
fn parse_direction_set(raw: &str, k: usize) -> Result<Vec<usize>> {
    let inner = raw
        .trim()
        .trim_start_matches('{')
        .trim_end_matches('}')
        .trim();
    let mut dirs = Vec::new();
    if !inner.is_empty() {
        for part in inner.split(',') {
            let v: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("direction {part:?} is not an integer")))?;
            if v == 0 || v > k {
                return Err(Error::Parse(format!(
                    "direction {v} outside 1..={k}"
                )));
            }
            dirs.push(v - 1);
        }
    }
    dirs.sort_unstable();
    dirs.dedup();
    Ok(dirs)
}

// ---------------------------------------------------------------------------
// induce and extend
// ---------------------------------------------------------------------------

fn cmd_induce(
    path: &Path,
    pi_path: &Path,
    levels: usize,
    out: Option<&Path>,
    base: &TolerancePolicy<f64>,
    flag: Option<f64>,
    echo: &str,
) -> Result<(Report, i32)> {
    let loaded = load_problem(path, base, flag)?;
    let rep_json = io::parse_rep_file(&read_text(pi_path)?)?;
    let pi: AlgebraRep<f64> = io::algebra_rep_from_json(loaded.system.algebra(), &rep_json)?;
    let (induced, window) = fock::induce(&loaded.system, &pi, levels, &loaded.pol)?;
    let class = induced.classify(loaded.pol.abs_tol)?;

    let mut report = Report::new(echo, &loaded.pol);
    class_residuals(&mut report, &class);
    let mut results = json!({
        "dim_h": induced.dim_h(),
        "levels": levels,
        "exact": window.is_exact(),
        "fibers": window
            .fibers()
            .iter()
            .map(|f| json!({ "n": f.n, "offset": f.offset, "dim": f.dim }))
            .collect::<Vec<_>>(),
        "representation": io::covariant_to_json(&induced)?,
    });
    if let Some(out_path) = out {
        let mut pf = io::problem_to_json(&loaded.system, Some(&induced))?;
        pf.tolerance = loaded.file.tolerance.clone();
        pf.seed = loaded.file.seed;
        write_atomic(out_path, &io::to_json_string(&pf)?)?;
        results["written"] = json!(out_path.display().to_string());
    }
    report.results = results;
    Ok((report, 0))
}

fn induction_rows(matrix: &InductionMatrix) -> Vec<Vec<u64>> {
    (0..matrix.size())
        .map(|i| (0..matrix.size()).map(|j| matrix.entry(i, j)).collect())
        .collect()
}

fn cmd_extend(
    path: &Path,
    mode: ExtendMode,
    bound: u64,
    levels: usize,
    base: &TolerancePolicy<f64>,
    flag: Option<f64>,
    echo: &str,
) -> Result<(Report, i32)> {
    let loaded = load_problem(path, base, flag)?;
    if loaded.system.k() != 1 {
        return Err(Error::InvalidStructure(format!(
            "extend covers a single correspondence, the file has k = {}",
            loaded.system.k()
        )));
    }
    let rep = require_rep(&loaded)?;
    let m = multiplicity_vector(rep.sigma(), &loaded.pol)?;
    let matrix = extend::multiplicity_matrix(loaded.system.corr(0), &loaded.pol)?;

    let mut report = Report::new(echo, &loaded.pol);
    let mut results = json!({
        "m": io::multiplicity_to_json(&m),
        "induction_matrix": induction_rows(&matrix),
        "unit1": extend::unit1_applies(&matrix),
    });

    match mode {
        ExtendMode::Unit2 => {
            let (ok, witness) = extend::unit2_check(&matrix, &m)?;
            results["unit2"] = json!(ok);
            results["violations"] = json!(witness.iter().map(|i| i + 1).collect::<Vec<_>>());
            report.results = results;
            Ok((report, if ok { 0 } else { 3 }))
        }
        ExtendMode::Eqrep => {
            let cert = extend::eqrep_solve(&matrix, &m, bound)?;
            let code = if matches!(cert.outcome, SolveOutcome::Feasible) {
                0
            } else {
                3
            };
            results["certificate"] = io::extension_json(&cert);
            report.results = results;
            Ok((report, code))
        }
        ExtendMode::Construct => {
            let cert = extend::eqrep_solve(&matrix, &m, bound)?;
            results["certificate"] = io::extension_json(&cert);
            if !cert.feasible() {
                report.results = results;
                return Ok((report, 3));
            }
            let m_prime = cert
                .m_prime
                .clone()
                .ok_or_else(|| Error::RankInconsistency {
                    context: "extend construct".into(),
                    detail: "feasible certificate without m'".into(),
                })?;
            if m_prime.as_finite().is_none() {
                results["note"] = json!(
                    "m' has infinite entries: the extension exists but has no \
                     finite-dimensional model, so only the certificate is emitted"
                );
                report.results = results;
                return Ok((report, 0));
            }
            let (ext, unitary) =
                extend::build_extension(&loaded.system, rep.sigma(), &m_prime, levels, &loaded.pol)?;
            let class = ext.classify(loaded.pol.abs_tol)?;
            class_residuals(&mut report, &class);
            results["extension"] = json!({
                "dim_h": ext.dim_h(),
                "representation": io::covariant_to_json(&ext)?,
                "unitary": unitary_summary(&unitary),
            });
            report.results = results;
            Ok((report, 0))
        }
    }
}

fn unitary_summary(w: &CMatrix<f64>) -> Value {
    json!({
        "rows": w.nrows(),
        "cols": w.ncols(),
        "entries": io::matrix_to_json(w),
    })
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

fn cmd_model(
    family: &ModelCmd,
    base: &TolerancePolicy<f64>,
    flag: Option<f64>,
    echo: &str,
) -> Result<(Report, i32)> {
    let pol = effective_policy(base, None, flag)?;
    let tol = pol.abs_tol;
    match family {
        ModelCmd::TwistedShift {
            k,
            multiplicity,
            levels,
            seed,
            out,
        } => {
            let spec: TwistedShiftSpec<f64> = match seed {
                Some(s) => models::random_twisted_shift_spec(*k, *multiplicity, *levels, *s),
                None => TwistedShiftSpec::untwisted(*k, *multiplicity, *levels),
            };
            let rep = models::twisted_shift(&spec, tol, &pol)?;
            let mut pf = io::problem_to_json(rep.system(), Some(&rep))?;
            pf.seed = *seed;
            let facts = json!({
                "family": "twisted-shift",
                "k": k,
                "multiplicity": multiplicity,
                "levels": levels,
                "dim_h": rep.dim_h(),
            });
            finish_model(pf, facts, out.as_deref(), &pol, echo)
        }
        ModelCmd::Automorphism {
            blocks,
            perm,
            pi,
            levels,
            out,
        } => {
            let block_dims = parse_usize_list(blocks, "blocks")?;
            let algebra = FinCStarAlgebra::new(block_dims)?;
            let perm = parse_permutation(perm, algebra.num_blocks())?;
            let auto = AlgebraAutomorphism::permutation(&algebra, perm)?;
            let spec = AutomorphismSystemSpec {
                algebra: algebra.clone(),
                autos: vec![auto],
            };
            let mult = parse_multiplicities(pi)?;
            let pi_rep = rep_from_multiplicities::<f64>(&algebra, &mult)?;
            if pi_rep.space_dim() == 0 {
                return Err(Error::InvalidStructure(
                    "the coefficient representation is zero-dimensional".into(),
                ));
            }
            let rep = models::automorphism_induced(&spec, &pi_rep, *levels, tol, &pol)?;
            let pf = io::problem_to_json(rep.system(), Some(&rep))?;
            let facts = json!({
                "family": "automorphism",
                "blocks": algebra.block_dims(),
                "levels": levels,
                "dim_h": rep.dim_h(),
            });
            finish_model(pf, facts, out.as_deref(), &pol, echo)
        }
        ModelCmd::Graph {
            vertices,
            edges,
            weights,
            out,
        } => {
            let edge_list = parse_edges(edges, *vertices)?;
            let spec = GraphSpec::single_color(*vertices, edge_list);
            let w = match weights {
                Some(raw) => parse_usize_list(raw, "weights")?,
                None => vec![1; *vertices],
            };
            let rep = models::graph_rep(&spec, &w, tol, &pol)?;
            let pf = io::problem_to_json(rep.system(), Some(&rep))?;
            let facts = json!({
                "family": "graph",
                "vertices": vertices,
                "edges": spec
                    .colors[0]
                    .iter()
                    .map(|e| format!("{}>{}", e.src + 1, e.dst + 1))
                    .collect::<Vec<_>>(),
                "weights": w,
                "dim_h": rep.dim_h(),
            });
            finish_model(pf, facts, out.as_deref(), &pol, echo)
        }
        ModelCmd::Reference { slot, out } => {
            let bundle = models::reference_fixtures::<f64>()?;
            let fixture = bundle.fixture(*slot)?;
            let system =
                ProductSystem::new(vec![fixture.correspondence.clone()], Vec::new(), &pol)?;
            let rep = reference_rep(&system, fixture)?;
            let pf = io::problem_to_json(&system, rep.as_ref())?;
            let expectations: Vec<Value> = fixture
                .expectations
                .iter()
                .map(|e| {
                    json!({
                        "m": io::multiplicity_to_json(&e.target),
                        "outcome": e.outcome.to_string(),
                        "m_prime": e.complement.as_ref().map(io::multiplicity_to_json),
                    })
                })
                .collect();
            let facts = json!({
                "family": "reference",
                "slot": slot,
                "name": fixture.name,
                "induction_matrix": induction_rows(&fixture.matrix),
                "expectations": expectations,
            });
            finish_model(pf, facts, out.as_deref(), &pol, echo)
        }
    }
}

/// The fixture's first recorded target `m`, realized as a covariant
/// representation with zero creation maps, so the emitted file feeds
/// straight into `extend`.
fn reference_rep(
    system: &ProductSystem<f64>,
    fixture: &models::ReferenceFixture<f64>,
) -> Result<Option<CovariantRep<f64>>> {
    let Some(expectation) = fixture.expectations.first() else {
        return Ok(None);
    };
    let sigma = rep_from_multiplicities::<f64>(system.algebra(), &expectation.target)?;
    let h = sigma.space_dim();
    let tmaps = (0..system.k())
        .map(|i| CMatrix::<f64>::zeros(h, system.corr(i).dim() * h))
        .collect();
    let pol = TolerancePolicy::default();
    let rep = CovariantRep::from_normalized(system.clone(), sigma, tmaps, None, &pol)?;
    Ok(Some(rep))
}

fn finish_model(
    pf: ProblemFile,
    facts: Value,
    out: Option<&Path>,
    pol: &TolerancePolicy<f64>,
    echo: &str,
) -> Result<(Report, i32)> {
    let mut report = Report::new(echo, pol);
    let mut results = facts;
    results["problem"] = serde_json::to_value(&pf).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(path) = out {
        write_atomic(path, &io::to_json_string(&pf)?)?;
        results["written"] = json!(path.display().to_string());
    }
    report.results = results;
    Ok((report, 0))
}

// ---------------------------------------------------------------------------
// Flag parsing helpers
// ---------------------------------------------------------------------------

fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("{what} entry {part:?} is not an integer")))
        })
        .collect()
}

/// A 1-based permutation list like "2,1" into 0-based indices.
fn parse_permutation(raw: &str, n: usize) -> Result<Vec<usize>> {
    let entries = parse_usize_list(raw, "perm")?;
    if entries.len() != n {
        return Err(Error::DimensionMismatch {
            context: "block permutation".into(),
            expected: format!("{n}"),
            found: format!("{}", entries.len()),
        });
    }
    entries
        .into_iter()
        .map(|v| {
            if v == 0 || v > n {
                Err(Error::Parse(format!("perm entry {v} outside 1..={n}")))
            } else {
                Ok(v - 1)
            }
        })
        .collect()
}

fn parse_multiplicities(raw: &str) -> Result<woldkit::cstar::MultiplicityVector> {
    let entries = parse_usize_list(raw, "pi")?;
    let entries: Vec<u64> = entries.into_iter().map(|v| v as u64).collect();
    Ok(woldkit::cstar::MultiplicityVector::from_finite(&entries))
}

/// Edges written "src>dst" (1-based), separated by semicolons.
fn parse_edges(raw: &str, vertices: usize) -> Result<Vec<GraphEdge>> {
    let mut edges = Vec::new();
    for part in raw.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((src, dst)) = part.split_once('>') else {
            return Err(Error::Parse(format!(
                "edge {part:?} is not of the form src>dst"
            )));
        };
        let parse_vertex = |s: &str| -> Result<usize> {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("vertex {s:?} is not an integer")))?;
            if v == 0 || v > vertices {
                return Err(Error::Parse(format!(
                    "vertex {v} outside 1..={vertices}"
                )));
            }
            Ok(v - 1)
        };
        edges.push(GraphEdge {
            src: parse_vertex(src)?,
            dst: parse_vertex(dst)?,
        });
    }
    if edges.is_empty() {
        return Err(Error::InvalidStructure("the graph has no edges".into()));
    }
    Ok(edges)
}
