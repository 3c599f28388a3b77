//! Unitary extensions of induced representations via a multiplicity
//! calculus.
//!
//! A covariant representation `(ρ, V)` of a correspondence `E` over
//! `A = ⊕_b M_{n_b}` on `K ⊇ H` *unitarily extends* `(σ, T)` on `H` when it
//! restricts to `(σ, T)` and its creation map `Ṽ : E ⊗_ρ K → K` is unitary,
//! i.e. the extension is simultaneously isometric and fully coisometric.
//! For the induced (Fock shift) representation of a coefficient
//! representation `π` everything is decided by block multiplicities:
//!
//! * The **induction matrix** `M` of `E` is the `s × s` nonnegative integer
//!   matrix with `M_{ij} · n_i · n_j = dim φ(z_i) E z_j`, where `z_1..z_s`
//!   are the central block projections of `A`. Inducing a coefficient
//!   representation with multiplicity vector `m` through `E` produces a
//!   representation with multiplicity vector `M·m`, so `M` is the complete
//!   invariant of the induction functor ([`multiplicity_matrix`]).
//!
//! * A unitary extension of the induced representation of `π`
//!   (multiplicity `m`) living on `F(E) ⊗_π K ⊕ K′` exists exactly when
//!   the **multiplicity equation**
//!
//!   ```text
//!       M ⊙ m′ = m + m′
//!   ```
//!
//!   has a solution `m′` over the extended naturals `ℕ ∪ {∞}` (with
//!   `∞ + x = ∞`, `0·∞ = 0` and `c·∞ = ∞` for `c > 0`); `m′` is then the
//!   multiplicity vector of the complement `K′`. [`eqrep_solve`] decides
//!   the equation by enumerating candidate infinite supports and solving
//!   the remaining finite linear system exactly over the rationals.
//!
//! Two sufficient conditions shortcut the search. When every row of `M` is
//! nonzero the left action is injective and the all-`∞` vector always
//! solves the equation ([`unit1_applies`]). When `m ≤ M·m` entrywise
//! ([`unit2_check`]) the vector that is `∞` on the reachability closure of
//! `supp(m)` and `0` elsewhere is a solution, so the equation is feasible.
//!
//! For finite `m′` the extension is materialized by [`build_extension`]:
//! the complement carries the canonical representation `π′` of
//! multiplicity `m′`, a unitary `W : E ⊗_{π′} K′ → (A ⊗_π K) ⊕ K′`
//! intertwining `φ ⊗_{π′} id` with the direct sum action supplies the
//! missing creation block, and the assembled representation restricts to
//! the induced one exactly. Infinite entries of `m′` cannot be
//! materialized on a finite window and remain symbolic certificates.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::corr::{compute_induced_rep, Correspondence};
use crate::cstar::{
    intertwiner, multiplicity_vector, rep_from_multiplicities, AlgebraRep, ExtNat,
    FinCStarAlgebra, MultiplicityVector,
};
use crate::fock::induce;
use crate::numlin::{range_projection, rank, SubspaceProjection, TolerancePolicy};
use crate::prodsys::{mi_total, MultiIndex, ProductSystem};
use crate::reps::{CovariantRep, Window};
use crate::wold::subsets_lex;
use crate::{CMatrix, Error, Real, Result};

/// Hard cap on the number of lattice points probed per infinite-support
/// candidate, so rank-deficient systems with large search boxes cannot
/// stall the solver. Exhausting the cap is reported as an undecided
/// search, never as infeasibility.
const MAX_TRIALS: u64 = 1_000_000;

/// The block-multiplicity matrix of the induction functor `π ↦ φ ⊗_π id`.
///
/// Entry `M_{ij} = dim(φ(z_i) E z_j) / (n_i n_j)` counts how many copies of
/// the `i`-th irreducible appear when the `j`-th irreducible is induced
/// through the correspondence. Extended-natural matrix action is provided
/// by [`InductionMatrix::apply`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InductionMatrix {
    algebra: FinCStarAlgebra,
    entries: Vec<u64>,
}

impl InductionMatrix {
    /// Wraps a row-major `s × s` entry list for the given algebra.
    pub fn new(algebra: FinCStarAlgebra, entries: Vec<u64>) -> Result<Self> {
        let s = algebra.num_blocks();
        if entries.len() != s * s {
            return Err(Error::DimensionMismatch {
                context: "InductionMatrix".into(),
                expected: format!("{} entries", s * s),
                found: format!("{}", entries.len()),
            });
        }
        Ok(InductionMatrix { algebra, entries })
    }

    /// The coefficient algebra whose blocks index rows and columns.
    pub fn algebra(&self) -> &FinCStarAlgebra {
        &self.algebra
    }

    /// Number of blocks `s` (the matrix is `s × s`).
    pub fn size(&self) -> usize {
        self.algebra.num_blocks()
    }

    /// Entry `M_{ij}`.
    pub fn entry(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.size() + j]
    }

    /// True when row `i` vanishes, i.e. nothing induces into block `i`.
    pub fn row_is_zero(&self, i: usize) -> bool {
        (0..self.size()).all(|j| self.entry(i, j) == 0)
    }

    /// Matrix action `(M ⊙ m)_i = Σ_j M_{ij} m_j` over the extended
    /// naturals, with `0·∞ = 0`.
    pub fn apply(&self, m: &MultiplicityVector) -> Result<MultiplicityVector> {
        let s = self.size();
        if m.len() != s {
            return Err(Error::DimensionMismatch {
                context: "InductionMatrix::apply".into(),
                expected: format!("{s} entries"),
                found: format!("{}", m.len()),
            });
        }
        let entries = (0..s)
            .map(|i| {
                (0..s).fold(ExtNat::Fin(0), |acc, j| {
                    acc.add(m.entries()[j].mul_nat(self.entry(i, j)))
                })
            })
            .collect();
        Ok(MultiplicityVector::new(entries))
    }
}

impl fmt::Display for InductionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.size();
        write!(f, "[")?;
        for i in 0..s {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..s {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.entry(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Computes the induction matrix of a correspondence.
///
/// For each pair of blocks the corner `φ(z_i) E z_j` is spanned by the
/// images of the coordinate basis under the two central actions; its
/// honest dimension is the rank of the Gram matrix of those images, so
/// degenerate coordinates cannot inflate it. The dimension of every corner
/// must be divisible by `n_i n_j` (it is a `M_{n_i}`–`M_{n_j}` bimodule);
/// a violation is reported as a rank inconsistency.
pub fn multiplicity_matrix<T: Real>(
    e: &Correspondence<T>,
    pol: &TolerancePolicy<T>,
) -> Result<InductionMatrix> {
    let algebra = e.algebra().clone();
    let s = algebra.num_blocks();
    let dims = algebra.block_dims().to_vec();
    let g = e.scalar_gram();
    let mut entries = vec![0u64; s * s];
    for i in 0..s {
        let left = e.left_of(&algebra.central_projection::<T>(i));
        for j in 0..s {
            let right = e.right_of(&algebra.central_projection::<T>(j));
            let images = &left * &right;
            let gram = images.adjoint() * &g * &images;
            let corner = rank(&gram, pol)?;
            let cell = dims[i] * dims[j];
            if corner % cell != 0 {
                return Err(Error::RankInconsistency {
                    context: "multiplicity_matrix".into(),
                    detail: format!(
                        "dim φ(z_{i}) E z_{j} = {corner} is not divisible by n_{i}·n_{j} = {cell}"
                    ),
                });
            }
            entries[i * s + j] = (corner / cell) as u64;
        }
    }
    InductionMatrix::new(algebra, entries)
}

/// True when the left action of the correspondence is injective, which for
/// a finite-dimensional coefficient algebra amounts to every row of the
/// induction matrix being nonzero. In that case the multiplicity equation
/// is always feasible: the all-`∞` vector is a solution, so every induced
/// representation admits a unitary extension.
pub fn unit1_applies(matrix: &InductionMatrix) -> bool {
    (0..matrix.size()).all(|i| !matrix.row_is_zero(i))
}

/// Checks the entrywise domination `m ≤ M ⊙ m` and reports the violating
/// coordinates. When the check passes, the induced representation of `m`
/// contains a copy of `m` and the multiplicity equation is feasible with
/// the solution that is `∞` on the reachability closure of `supp(m)`.
pub fn unit2_check(
    matrix: &InductionMatrix,
    m: &MultiplicityVector,
) -> Result<(bool, Vec<usize>)> {
    let image = matrix.apply(m)?;
    let violations: Vec<usize> = (0..m.len())
        .filter(|&i| !m.entries()[i].leq(image.entries()[i]))
        .collect();
    Ok((violations.is_empty(), violations))
}

/// Verdict of the multiplicity-equation solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveOutcome {
    /// A solution `m′` was found and verified.
    Feasible,
    /// Every infinite-support pattern is obstructed by an exact
    /// coordinate-level argument; no solution exists.
    Infeasible,
    /// The bounded search was exhausted without a decision; a solution may
    /// exist beyond the search bound.
    Unknown,
}

impl fmt::Display for SolveOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveOutcome::Feasible => write!(f, "feasible"),
            SolveOutcome::Infeasible => write!(f, "infeasible"),
            SolveOutcome::Unknown => write!(f, "unknown"),
        }
    }
}

/// Outcome of deciding the multiplicity equation `M ⊙ m′ = m + m′`.
///
/// A feasible certificate carries the verified solution `m′` together with
/// its infinite support; an infeasible one records the coordinate-level
/// obstruction for every candidate support; an unknown one names the
/// supports whose lattice search hit the bound. The search bound is always
/// recorded so the verdict can be audited.
#[derive(Debug, Clone)]
pub struct ExtensionCertificate {
    /// Solver verdict.
    pub outcome: SolveOutcome,
    /// The complement multiplicity vector, present exactly when feasible.
    pub m_prime: Option<MultiplicityVector>,
    /// Coordinates of `m_prime` equal to `∞`.
    pub infinite_support: Vec<usize>,
    /// Per-coordinate bound of the lattice search over free variables.
    pub bound: u64,
    /// Human-readable trail of the search.
    pub notes: Vec<String>,
}

impl ExtensionCertificate {
    /// True when a verified solution was found.
    pub fn feasible(&self) -> bool {
        self.outcome == SolveOutcome::Feasible
    }
}

/// What happened for a single infinite-support candidate.
enum SupportOutcome {
    /// Finite part of a solution, indexed like the finite coordinate list.
    Feasible(Vec<u64>),
    Infeasible(String),
    Exhausted(String),
}

/// Solves `(M_FF − I) x = m_F` over nonnegative integers, where `F` is the
/// finite coordinate list. Exact rational elimination decides consistency
/// and pins the pivot variables; free variables are enumerated over
/// `[0, bound]` in lexicographic order.
fn solve_finite_part(
    matrix: &InductionMatrix,
    fin: &[usize],
    m: &[u64],
    bound: u64,
) -> SupportOutcome {
    let f = fin.len();
    if f == 0 {
        return SupportOutcome::Feasible(Vec::new());
    }
    // Augmented system [(M_FF − I) | m_F] over exact rationals.
    let mut rows: Vec<Vec<BigRational>> = (0..f)
        .map(|r| {
            let mut row: Vec<BigRational> = (0..f)
                .map(|c| {
                    let v = matrix.entry(fin[r], fin[c]) as i128 - i128::from(r == c);
                    BigRational::from_integer(BigInt::from(v))
                })
                .collect();
            row.push(BigRational::from_integer(BigInt::from(m[fin[r]])));
            row
        })
        .collect();
    let Some(pivots) = reduced_echelon(&mut rows, f) else {
        return SupportOutcome::Infeasible("the rational system is inconsistent".into());
    };
    let free: Vec<usize> = (0..f).filter(|c| !pivots.contains(c)).collect();
    if free.is_empty() {
        return match realize_point(&rows, &pivots, &free, &[], f) {
            Some(x) => SupportOutcome::Feasible(x),
            None => SupportOutcome::Infeasible(
                "the unique rational solution is not a nonnegative integer vector".into(),
            ),
        };
    }
    let mut vals = vec![0u64; free.len()];
    let mut trials: u64 = 0;
    loop {
        trials += 1;
        if trials > MAX_TRIALS {
            return SupportOutcome::Exhausted(format!(
                "lattice search stopped after {MAX_TRIALS} trials"
            ));
        }
        if let Some(x) = realize_point(&rows, &pivots, &free, &vals, f) {
            return SupportOutcome::Feasible(x);
        }
        // Lexicographic odometer over the free coordinates.
        let mut pos = free.len();
        loop {
            if pos == 0 {
                return SupportOutcome::Exhausted(format!(
                    "no lattice point with free coordinates in [0, {bound}]"
                ));
            }
            pos -= 1;
            if vals[pos] < bound {
                vals[pos] += 1;
                for v in &mut vals[pos + 1..] {
                    *v = 0;
                }
                break;
            }
        }
    }
}

/// Gauss–Jordan elimination of the augmented system `[A | b]` with `f`
/// variable columns. Returns the pivot columns, or `None` when the system
/// is inconsistent.
fn reduced_echelon(rows: &mut [Vec<BigRational>], f: usize) -> Option<Vec<usize>> {
    let n = rows.len();
    let mut pivots = Vec::new();
    let mut r = 0usize;
    for c in 0..f {
        let Some(p) = (r..n).find(|&p| !rows[p][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].clone();
        for entry in rows[r].iter_mut() {
            *entry = &*entry / &inv;
        }
        for q in 0..n {
            if q != r && !rows[q][c].is_zero() {
                let factor = rows[q][c].clone();
                for cc in 0..=f {
                    let delta = &factor * &rows[r][cc];
                    rows[q][cc] = &rows[q][cc] - delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == n {
            break;
        }
    }
    for row in rows.iter() {
        if row[..f].iter().all(Zero::is_zero) && !row[f].is_zero() {
            return None;
        }
    }
    Some(pivots)
}

/// Evaluates the pivot variables for one free-variable assignment and
/// returns the full solution when it is a nonnegative integer vector.
fn realize_point(
    rows: &[Vec<BigRational>],
    pivots: &[usize],
    free: &[usize],
    vals: &[u64],
    f: usize,
) -> Option<Vec<u64>> {
    let mut x = vec![BigRational::zero(); f];
    for (idx, &c) in free.iter().enumerate() {
        x[c] = BigRational::from_integer(BigInt::from(vals[idx]));
    }
    for (r, &pc) in pivots.iter().enumerate() {
        let mut v = rows[r][f].clone();
        for &fc in free {
            if !rows[r][fc].is_zero() {
                v -= &rows[r][fc] * &x[fc];
            }
        }
        if v.is_negative() || !v.is_integer() {
            return None;
        }
        x[pc] = v;
    }
    x.iter()
        .map(|v| v.to_integer().to_u64())
        .collect::<Option<Vec<u64>>>()
}

/// Extends two multiplicity vectors entrywise: `(m + m′)_i = m_i + m′_i`.
fn sum_vectors(a: &MultiplicityVector, b: &MultiplicityVector) -> MultiplicityVector {
    MultiplicityVector::new(
        a.entries()
            .iter()
            .zip(b.entries())
            .map(|(x, y)| x.add(*y))
            .collect(),
    )
}

/// A support set rendered 1-based for certificate notes, like `{1, 3}`.
fn support_label(dirs: &[usize]) -> String {
    if dirs.is_empty() {
        return "∅".into();
    }
    let inner: Vec<String> = dirs.iter().map(|d| format!("{}", d + 1)).collect();
    format!("{{{}}}", inner.join(", "))
}

/// Decides the multiplicity equation `M ⊙ m′ = m + m′` over `ℕ ∪ {∞}`.
///
/// Writing `S` for the infinite support of a candidate `m′`, the equation
/// splits into a combinatorial and a linear half:
///
/// * rows inside `S` need an infinite source: `∀ i ∈ S ∃ j ∈ S` with
///   `M_{ij} > 0`;
/// * rows outside `S` must not see one: `∀ i ∉ S ∀ j ∈ S`, `M_{ij} = 0`;
/// * the finite coordinates solve `(M_FF − I) x = m_F` over `ℕ`.
///
/// Supports are enumerated in lexicographic order and the linear system is
/// solved exactly over the rationals, so the first verdict returned is
/// deterministic. Free variables (rank-deficient systems) are searched
/// over `[0, bound]`; exhausting that search leaves the support undecided
/// and is reported as [`SolveOutcome::Unknown`] rather than infeasible.
/// Every feasible solution is re-verified against the extended-natural
/// equation before it is returned.
pub fn eqrep_solve(
    matrix: &InductionMatrix,
    m: &MultiplicityVector,
    bound: u64,
) -> Result<ExtensionCertificate> {
    let s = matrix.size();
    if m.len() != s {
        return Err(Error::DimensionMismatch {
            context: "eqrep_solve".into(),
            expected: format!("{s} entries"),
            found: format!("{}", m.len()),
        });
    }
    let Some(mf) = m.as_finite() else {
        return Err(Error::InvalidStructure(
            "eqrep_solve requires a finite multiplicity vector m".into(),
        ));
    };
    let mut notes = Vec::new();
    for i in 0..s {
        if matrix.row_is_zero(i) && mf[i] > 0 {
            notes.push(format!(
                "zero induction row {} with m_{} = {}, so coordinate {} of M⊙m′ = m + m′ cannot hold",
                i + 1,
                i + 1,
                mf[i],
                i + 1
            ));
            return Ok(ExtensionCertificate {
                outcome: SolveOutcome::Infeasible,
                m_prime: None,
                infinite_support: Vec::new(),
                bound,
                notes,
            });
        }
    }
    let mut exhausted: Vec<String> = Vec::new();
    for support in subsets_lex(s) {
        let fed = support
            .iter()
            .all(|&i| support.iter().any(|&j| matrix.entry(i, j) > 0));
        let insulated = (0..s)
            .filter(|i| !support.contains(i))
            .all(|i| support.iter().all(|&j| matrix.entry(i, j) == 0));
        if !fed || !insulated {
            continue;
        }
        let fin: Vec<usize> = (0..s).filter(|i| !support.contains(i)).collect();
        match solve_finite_part(matrix, &fin, &mf, bound) {
            SupportOutcome::Feasible(x) => {
                let mut entries = vec![ExtNat::Fin(0); s];
                for &i in &support {
                    entries[i] = ExtNat::Inf;
                }
                for (pos, &i) in fin.iter().enumerate() {
                    entries[i] = ExtNat::Fin(x[pos]);
                }
                let m_prime = MultiplicityVector::new(entries);
                let lhs = matrix.apply(&m_prime)?;
                let rhs = sum_vectors(m, &m_prime);
                if lhs != rhs {
                    return Err(Error::RankInconsistency {
                        context: "eqrep_solve".into(),
                        detail: format!(
                            "candidate m′ = {m_prime} fails verification: M⊙m′ = {lhs} but m + m′ = {rhs}"
                        ),
                    });
                }
                if !exhausted.is_empty() {
                    notes.push(format!(
                        "earlier supports left undecided within the bound: {}",
                        exhausted.join("; ")
                    ));
                }
                notes.push(format!(
                    "solution with infinite support {} found and verified",
                    support_label(&support)
                ));
                return Ok(ExtensionCertificate {
                    outcome: SolveOutcome::Feasible,
                    m_prime: Some(m_prime),
                    infinite_support: support,
                    bound,
                    notes,
                });
            }
            SupportOutcome::Infeasible(reason) => {
                notes.push(format!("support {}: {reason}", support_label(&support)));
            }
            SupportOutcome::Exhausted(reason) => {
                exhausted.push(format!("support {}: {reason}", support_label(&support)));
            }
        }
    }
    if exhausted.is_empty() {
        notes.push("every admissible infinite support is obstructed".into());
        Ok(ExtensionCertificate {
            outcome: SolveOutcome::Infeasible,
            m_prime: None,
            infinite_support: Vec::new(),
            bound,
            notes,
        })
    } else {
        notes.extend(exhausted);
        notes.push("search bound exhausted before a decision was reached".into());
        Ok(ExtensionCertificate {
            outcome: SolveOutcome::Unknown,
            m_prime: None,
            infinite_support: Vec::new(),
            bound,
            notes,
        })
    }
}

/// Materializes a unitary extension of the induced representation of `π`
/// with a finite complement multiplicity `m′`.
///
/// The extension lives on `F_N(E) ⊗_π K ⊕ K′` where `K′` carries the
/// canonical representation `π′` of multiplicity `m′`. The creation map
/// keeps the Fock shift on the first summand and sends `E ⊗ K′` through a
/// unitary
///
/// ```text
///     W : E ⊗_{π′} K′ → (A ⊗_π K) ⊕ K′
/// ```
///
/// intertwining `φ ⊗_{π′} id` with the direct sum of the level-zero fiber
/// action and `π′`; such a `W` exists exactly when `M ⊙ m′ = m + m′`,
/// which is verified before anything is built. The result restricts to
/// `induce(system, π, bound)` exactly, is isometric away from the
/// truncation boundary and fully coisometric everywhere: the Fock shift
/// covers every fiber of positive level and `W` covers the level-zero
/// fiber together with `K′`. Returns the representation and `W` (written
/// on the orthonormal coordinates of `E ⊗_{π′} K′`).
///
/// Infinite entries of `m′` are rejected: they cannot be materialized on a
/// finite window and admit only the symbolic certificate produced by
/// [`eqrep_solve`]. Product systems with more than one direction are
/// rejected as unsupported.
pub fn build_extension<T: Real>(
    system: &ProductSystem<T>,
    pi: &AlgebraRep<T>,
    m_prime: &MultiplicityVector,
    bound: usize,
    pol: &TolerancePolicy<T>,
) -> Result<(CovariantRep<T>, CMatrix<T>)> {
    if system.k() != 1 {
        return Err(Error::Unsupported(
            "build_extension covers a single correspondence (k = 1)".into(),
        ));
    }
    if pi.algebra() != system.algebra() {
        return Err(Error::InvalidStructure(
            "build_extension: coefficient representation over a different algebra".into(),
        ));
    }
    if m_prime.as_finite().is_none() {
        return Err(Error::Unsupported(
            "build_extension requires a finite m′; infinite complement multiplicities remain symbolic".into(),
        ));
    }
    let algebra = system.algebra().clone();
    let matrix = multiplicity_matrix(system.corr(0), pol)?;
    let m = multiplicity_vector(pi, pol)?;
    let lhs = matrix.apply(m_prime)?;
    let rhs = sum_vectors(&m, m_prime);
    if lhs != rhs {
        return Err(Error::InvalidStructure(format!(
            "build_extension: m′ = {m_prime} does not solve the multiplicity equation (M⊙m′ = {lhs}, m + m′ = {rhs})"
        )));
    }

    let (fock, meta) = induce(system, pi, bound, pol)?;
    let h_fock = meta.total_dim();
    let pi_prime = rep_from_multiplicities::<T>(&algebra, m_prime)?;
    let kp = pi_prime.space_dim();

    // The level-zero fiber in its own induced coordinates, so the range of
    // W matches the Fock block exactly.
    let zero: MultiIndex = vec![0];
    let piece0 = system.build_piece(&zero, pol)?;
    let (fiber0, _) = compute_induced_rep(piece0.corr(), pi, pol)?;
    let k0 = fiber0.space_dim();
    let (nu, space_x) = compute_induced_rep(system.corr(0), &pi_prime, pol)?;
    let target = fiber0.direct_sum(&pi_prime)?;
    let w = intertwiner(&nu, &target, pol)?;

    let d = system.corr(0).dim();
    let h_ext = h_fock + kp;
    let sigma_ext = fock.sigma().direct_sum(&pi_prime)?;
    let t_fock = fock.tmap_alg(0);
    let v_complement = &w * space_x.embed();
    let mut t_ext = CMatrix::<T>::zeros(h_ext, d * h_ext);
    for x in 0..d {
        t_ext
            .view_mut((0, x * h_ext), (h_fock, h_fock))
            .copy_from(&t_fock.view((0, x * h_fock), (h_fock, h_fock)));
        t_ext
            .view_mut((0, x * h_ext + h_fock), (k0, kp))
            .copy_from(&v_complement.view((0, x * kp), (k0, kp)));
        t_ext
            .view_mut((h_fock, x * h_ext + h_fock), (kp, kp))
            .copy_from(&v_complement.view((k0, x * kp), (kp, kp)));
    }

    let window = if meta.is_exact() {
        None
    } else {
        let mut levels = Vec::with_capacity(h_ext);
        for fiber in meta.fibers() {
            levels.extend(std::iter::repeat(mi_total(&fiber.n)).take(fiber.dim));
        }
        levels.extend(std::iter::repeat(0usize).take(kp));
        Some(Window::from_levels(&levels, bound))
    };
    let rep = CovariantRep::from_normalized(system.clone(), sigma_ext, vec![t_ext], window, pol)?;
    Ok((rep, w))
}

/// The minimal reducing subspace of `rep` containing a given subspace: the
/// iterated closure of `ran h` under the coefficient action, the creation
/// slices `Ṽ(ξ_x ⊗ ·)` and their adjoints, stopping when the rank
/// stabilizes. Applied to a unitary extension with `h` the embedded
/// original space, this is the smallest extension inside it.
pub fn minimal_extension<T: Real>(
    rep: &CovariantRep<T>,
    h: &SubspaceProjection<T>,
    pol: &TolerancePolicy<T>,
) -> Result<SubspaceProjection<T>> {
    let dim = rep.dim_h();
    if h.matrix().nrows() != dim {
        return Err(Error::DimensionMismatch {
            context: "minimal_extension".into(),
            expected: format!("{dim}-dimensional projection"),
            found: format!("{}", h.matrix().nrows()),
        });
    }
    let algebra = rep.system().algebra().clone();
    let mut current = h.clone();
    for _ in 0..=dim {
        let basis = current.basis()?;
        let mut reached: Vec<CMatrix<T>> = vec![basis.clone()];
        for (b, p, q) in algebra.unit_indices() {
            reached.push(rep.sigma().unit_image(b, p, q) * &basis);
        }
        for i in 0..rep.k() {
            let t = rep.tmap_alg(i);
            let di = rep.system().corr(i).dim();
            for x in 0..di {
                let slice = t.view((0, x * dim), (dim, dim)).clone_owned();
                reached.push(&slice * &basis);
                reached.push(slice.adjoint() * &basis);
            }
        }
        let total: usize = reached.iter().map(CMatrix::ncols).sum();
        let mut stacked = CMatrix::<T>::zeros(dim, total);
        let mut offset = 0usize;
        for block in &reached {
            stacked
                .view_mut((0, offset), (dim, block.ncols()))
                .copy_from(block);
            offset += block.ncols();
        }
        let next = range_projection(&stacked, pol)?;
        if next.rank() == current.rank() {
            return Ok(next);
        }
        current = next;
    }
    Err(Error::IterationCap {
        context: "minimal_extension".into(),
        cap: dim + 1,
    })
}

/// Smallest-support multiplicity vector `m̂` with `ρ ≤ M ⊙ m̂` entrywise,
/// greedy per coordinate: scanning the target coordinates in order, any
/// deficit is covered through the largest coefficient in that row (ties
/// resolved by the smallest column index). The result is verified before
/// it is returned. Rows of `M` that vanish while the target is positive
/// there make domination impossible and are reported as an error.
pub fn morita_hat(
    matrix: &InductionMatrix,
    rho: &MultiplicityVector,
) -> Result<MultiplicityVector> {
    let s = matrix.size();
    if rho.len() != s {
        return Err(Error::DimensionMismatch {
            context: "morita_hat".into(),
            expected: format!("{s} entries"),
            found: format!("{}", rho.len()),
        });
    }
    let Some(target) = rho.as_finite() else {
        return Err(Error::InvalidStructure(
            "morita_hat requires a finite target multiplicity vector".into(),
        ));
    };
    let blocked: Vec<usize> = (0..s)
        .filter(|&i| target[i] > 0 && matrix.row_is_zero(i))
        .collect();
    if !blocked.is_empty() {
        return Err(Error::InvalidStructure(format!(
            "no multiplicity vector dominates the target: rows {blocked:?} of the induction matrix vanish while the target is positive there"
        )));
    }
    let mut hat = vec![0u64; s];
    for i in 0..s {
        let reached: u64 = (0..s).map(|j| matrix.entry(i, j) * hat[j]).sum();
        if reached >= target[i] {
            continue;
        }
        let deficit = target[i] - reached;
        let j = (0..s)
            .max_by_key(|&j| (matrix.entry(i, j), std::cmp::Reverse(j)))
            .expect("at least one block");
        hat[j] += deficit.div_ceil(matrix.entry(i, j));
    }
    let hat = MultiplicityVector::from_finite(&hat);
    let image = matrix.apply(&hat)?;
    if !rho.leq(&image) {
        return Err(Error::RankInconsistency {
            context: "morita_hat".into(),
            detail: format!("greedy candidate m̂ = {hat} fails ρ ≤ M⊙m̂ (M⊙m̂ = {image})"),
        });
    }
    Ok(hat)
}
