//! Numerical toolkit for product systems of finite-dimensional
//! C*-correspondences and Wold-type decompositions of their covariant
//! representations.
//!
//! The crate is organized bottom-up:
//!
//! * [`numlin`] — dense complex linear algebra: deterministic Hermitian
//!   eigendecomposition, range projections, meets of subspaces, stabilized
//!   limits of decreasing projection sequences.
//! * [`cstar`] — finite-dimensional C*-algebras `A = ⊕_b M_{n_b}(ℂ)`, their
//!   elements, representations and multiplicity bookkeeping.
//! * [`corr`] — C*-correspondences over `A` presented by structure matrices
//!   on a finite generating basis, internal tensor products with Hilbert
//!   space representations, and tensor products of correspondences (with
//!   Gram null spaces quotiented out).
//! * [`prodsys`] — product systems over `ℕ₀ᵏ`: `k` correspondences plus
//!   pairwise flip isomorphisms, graded pieces `𝔼(n)` and reorder
//!   isomorphisms between tensor words.
//! * [`reps`] — covariant representations `(σ, T⁽¹⁾, …, T⁽ᵏ⁾)`, their
//!   classification (isometric, fully coisometric, doubly commuting), the
//!   endomorphisms `L_i` of the commutant and the lattice of range
//!   projections `P(n)`.
//! * [`wold`] — Wold-type decompositions: the doubly commuting case with
//!   induced-summand certificates, maximal α-summands in the general case,
//!   and weakly bi-induced decompositions for `k = 2, 3`.
//! * [`fock`] — finite level windows of Fock modules and the induced
//!   (Fock-shift) representations they carry.
//! * [`extend`] — the multiplicity calculus for unitary extensions of
//!   isometric representations in the single-correspondence case.
//! * [`models`] — concrete model families (twisted shifts, automorphism
//!   systems, higher-rank graphs) used as fixtures and reference points.
//! * [`io`] — JSON wire formats for problems and reports.
//!
//! Everything numerical is generic over the scalar precision through the
//! [`Real`] trait (implemented by `f32` and `f64`); the exact integer /
//! rational arithmetic used by the extension solver is precision-free.
//! Concrete `f64` aliases for the main types live at the crate root.

pub mod cstar;
pub mod extend;
pub mod fock;
pub mod io;
pub mod models;
pub mod numlin;
pub mod prodsys;
pub mod reps;
pub mod wold;

pub mod corr;

use nalgebra::RealField;
use num_traits::{Float, FromPrimitive, NumCast};

/// Scalar precision for all floating-point computation in the crate.
///
/// `f32` and `f64` implement it; `f64` is the working precision of the
/// command line tool and the test suite.
pub trait Real: RealField + Float + FromPrimitive + NumCast + Copy + Default {}

impl<T> Real for T where T: RealField + Float + FromPrimitive + NumCast + Copy + Default {}

/// Complex scalar over a [`Real`] precision.
pub type C<T> = nalgebra::Complex<T>;

/// Dense complex matrix; the only matrix type used by the crate.
pub type CMatrix<T> = nalgebra::DMatrix<C<T>>;

/// Dense complex column vector.
pub type CVector<T> = nalgebra::DVector<C<T>>;

/// Crate-wide error type.
///
/// Numerical diagnostics are reported in `f64` regardless of the scalar
/// precision of the computation that produced them.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("non-finite entry encountered in {0}")]
    NonFinite(String),

    #[error("matrix is not a projection in {context}: residual {residual:.3e} exceeds tol {tol:.3e}")]
    NotAProjection {
        context: String,
        residual: f64,
        tol: f64,
    },

    #[error("matrix is not positive semidefinite in {context}: min eigenvalue {min_eigenvalue:.3e}")]
    NotPsd {
        context: String,
        min_eigenvalue: f64,
    },

    #[error("monotonicity violated in {context}: residual {residual:.3e} exceeds tol {tol:.3e}")]
    Monotonicity {
        context: String,
        residual: f64,
        tol: f64,
    },

    #[error("iteration cap {cap} reached in {context} without stabilization")]
    IterationCap { context: String, cap: usize },

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("validation failed for {context}: {failures:?}")]
    FailedChecks {
        context: String,
        failures: Vec<String>,
    },

    #[error("rank inconsistency in {context}: {detail}")]
    RankInconsistency { context: String, detail: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// One named residual check inside a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    /// Name of the violated relation.
    pub name: String,
    /// Residual norm of the relation.
    pub residual: f64,
    /// Tolerance the residual was compared against.
    pub tol: f64,
}

/// Outcome of validating a structure: every violated relation by name, the
/// number of checks run and the worst residual seen.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// What was validated.
    pub context: String,
    /// Number of relations checked.
    pub checks_run: usize,
    /// Largest residual over all checks (also the passing ones).
    pub max_residual: f64,
    /// Checks whose residual exceeded the tolerance.
    pub violations: Vec<CheckRecord>,
}

impl ValidationReport {
    /// Empty report for the given context.
    pub fn new(context: impl Into<String>) -> Self {
        ValidationReport {
            context: context.into(),
            checks_run: 0,
            max_residual: 0.0,
            violations: Vec::new(),
        }
    }

    /// Records one residual check.
    pub fn check<T: Real>(&mut self, name: impl Into<String>, residual: T, tol: T) {
        self.checks_run += 1;
        let residual = diag(residual);
        if residual > self.max_residual || residual.is_nan() {
            self.max_residual = residual;
        }
        if residual > diag(tol) || residual.is_nan() {
            self.violations.push(CheckRecord {
                name: name.into(),
                residual,
                tol: diag(tol),
            });
        }
    }

    /// Records a structural (non-numeric) failure.
    pub fn fail(&mut self, name: impl Into<String>) {
        self.checks_run += 1;
        self.violations.push(CheckRecord {
            name: name.into(),
            residual: f64::INFINITY,
            tol: 0.0,
        });
    }

    /// Absorbs another report, prefixing its violation names.
    pub fn absorb(&mut self, other: ValidationReport) {
        self.checks_run += other.checks_run;
        if other.max_residual > self.max_residual {
            self.max_residual = other.max_residual;
        }
        for mut v in other.violations {
            v.name = format!("{}: {}", other.context, v.name);
            self.violations.push(v);
        }
    }

    /// True iff no check was violated.
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts a failed report into an error, or passes through.
    pub fn into_result(self) -> Result<ValidationReport> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::FailedChecks {
                context: self.context.clone(),
                failures: self
                    .violations
                    .iter()
                    .map(|v| format!("{} (residual {:.3e} > tol {:.3e})", v.name, v.residual, v.tol))
                    .collect(),
            })
        }
    }
}

/// Convert a scalar to `f64` for diagnostics.
pub(crate) fn diag<T: Real>(x: T) -> f64 {
    NumCast::from(x).unwrap_or(f64::NAN)
}

// Double-precision aliases for the main types.

/// `f64` tolerance policy.
pub type Tolerance = numlin::TolerancePolicy<f64>;
/// `f64` complex matrix.
pub type CMat = CMatrix<f64>;
/// `f64` orthogonal projection.
pub type Projection = numlin::SubspaceProjection<f64>;
