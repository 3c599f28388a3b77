//! Wold-type decompositions of isometric covariant representations.
//!
//! For a single isometry `V` on a Hilbert space the classical Wold theorem
//! splits the space into `H = H_u ⊕ H_s`, where `V` restricts to a unitary
//! on `H_u = ⋂_l ran V^l` and to a unilateral shift on `H_s`. This module
//! carries the same program out for an isometric covariant representation
//! `(σ, T^{(1)}, …, T^{(k)})` of a product system over `ℕ₀ᵏ`, in three
//! strengths:
//!
//! * **Per-direction limits.** [`p_infty_i`] computes the decreasing limit
//!   `P_∞^i = lim_l L_i^l(I)`, the largest projection whose range direction
//!   `i` maps onto itself (acts *fully coisometrically* on); [`p_infty`]
//!   computes the joint limit over all directions together with the gap to
//!   `⋀_i P_∞^i`, and [`max_fully_coisometric`] returns its projection.
//!
//! * **Doubly commuting decomposition.** When the representation is doubly
//!   commuting, the `2ᵏ` products
//!
//!   ```text
//!       P_α = Π_{j∈α} (I − P_∞^j) · Π_{i∉α} P_∞^i,        α ⊆ {1, …, k},
//!   ```
//!
//!   are reducing projections summing to the identity. On `H_α = ran P_α`
//!   the directions outside `α` act fully coisometrically and the directions
//!   inside `α` form an induced (Fock shift) representation; [`wold_dc`]
//!   computes all summands and certifies each claim. The lattice identity
//!   `P(m) P(n) = P(m ∨ n)` for `P(n) = L(n)(I)` is exposed through
//!   [`lattice_p`].
//!
//! * **General maximal summands.** Without double commutation the same kind
//!   of summand still exists maximally for every `α`. [`max_alpha_summand`]
//!   builds it from the one-direction kernels
//!
//!   ```text
//!       K^{(j)} = { h : T̃(m)(ξ ⊗ h) ⊥ ran T̃^{(j)}  for all m ∈ ℕ₀^{k∖j}, ξ },
//!   ```
//!
//!   ([`one_direction_kernel`]) via the base `R = ⋀_{j∈α} K^{(j)}`, its
//!   stabilization `R_∞ = lim_{n ∈ ℕ₀^{k,β}} L(n)(R)` along the complement
//!   `β`, and the fiber lattice `D(m) = L(m)(R_∞)`, `m ∈ ℕ₀^{k,α}`, whose
//!   orthogonal sum is `H_α`. [`max_doubly_commuting`] aggregates all `2ᵏ`
//!   maximal summands; their sum can be a proper subspace, and the reported
//!   `residual_sum` measures what is left over.
//!
//! * **Weakly induced decomposition** (`k = 2, 3`). The orthogonal
//!   complement of all proper maximal summands is reducing, and on it every
//!   product direction becomes induced after compressing to the kernels of
//!   the complementary directions: for each nonempty `γ ⊆ {1, …, k}` the
//!   representation `(σ, ⊗_{i∈γ} T^{(i)})` restricted to `⋀_{j∉γ} K^{(j)}`
//!   is induced. [`weakly_induced_decompose`] certifies exactly this.
//!
//! Induced parts are certified constructively: [`induced_certificate`]
//! produces the wandering subspace `ran Q(0)`, `Q(n) = Π_i (P_{n_i}^i −
//! P_{n_i+1}^i)`, the compression `σ₀` of `σ` to it with its multiplicity
//! vector, and the explicit unitary `U : ⊕_n 𝔼(n) ⊗_{σ₀} K → H`,
//! `ξ ⊗ h ↦ T̃(n)(ξ ⊗ h)`, together with the residuals of unitarity and of
//! the intertwining relations. All decisions are reported as residuals
//! against the caller's tolerance; violated checks surface as
//! [`Error::FailedChecks`] rather than silently wrong output.

use std::collections::HashMap;

use num_traits::Float;

use crate::corr::{corr_tensor, internal_tensor, Correspondence};
use crate::cstar::{multiplicity_vector, AlgebraRep, MultiplicityVector};
use crate::numlin::{
    commuting_product, eye, meet_all, op_norm, range_projection, stabilized_limit,
    SubspaceProjection, TolerancePolicy,
};
use crate::prodsys::{mi_add, mi_total, mi_unit, MultiIndex, ProductSystem};
use crate::reps::CovariantRep;
use crate::{CMatrix, Error, Real, Result, ValidationReport};

/// Certificate that a representation is unitarily equivalent to the induced
/// representation of its wandering subspace.
///
/// The wandering subspace is `K = ran Q(0)` with
/// `Q(n) = Π_i (P_{n_i}^i − P_{n_i+1}^i)` and `P_l^i = L_i^l(I)`; the
/// `unitary` maps `⊕_n 𝔼(n) ⊗_{σ₀} K → H` by `ξ ⊗ h ↦ T̃(n)(ξ ⊗ h)`, with
/// the fibers concatenated in the order listed by `realized`.
#[derive(Debug, Clone)]
pub struct InducedCertificate<T: Real> {
    /// Projection onto the wandering subspace `K`.
    pub wandering: SubspaceProjection<T>,
    /// Orthonormal basis of `K`, the columns the unitary is built from.
    pub wandering_basis: CMatrix<T>,
    /// Compression `σ₀` of `σ` to the wandering subspace.
    pub wandering_rep: AlgebraRep<T>,
    /// Multiplicity vector of `σ₀` over the blocks of the algebra.
    pub multiplicity: MultiplicityVector,
    /// Realized fibers `(n, dim 𝔼(n) ⊗_{σ₀} K)` in level-lexicographic order.
    pub realized: Vec<(MultiIndex, usize)>,
    /// Largest total level `|n|` of a realized fiber.
    pub level_bound: usize,
    /// The transport unitary `⊕_n 𝔼(n) ⊗_{σ₀} K → H`.
    pub unitary: CMatrix<T>,
    /// `max(‖U*U − I‖, ‖UU* − I‖)`.
    pub unitary_residual: T,
    /// Largest residual of the algebra and shift intertwining relations.
    pub intertwining_residual: T,
}

/// Construction record of one maximal `α`-summand.
#[derive(Debug, Clone)]
pub struct SummandCertificate<T: Real> {
    /// The direction set `α` the summand shifts along.
    pub alpha: Vec<usize>,
    /// One-direction kernels `K^{(j)}` for `j ∈ α`, in the order of `alpha`.
    pub kernels: Vec<SubspaceProjection<T>>,
    /// The base `R = ⋀_{j∈α} K^{(j)}` (the identity for `α = ∅`).
    pub base: SubspaceProjection<T>,
    /// The stabilization `R_∞ = lim_{n ∈ ℕ₀^{k,β}} L(n)(R)` along `β = αᶜ`.
    pub stable: SubspaceProjection<T>,
    /// Nonzero fibers `(m, rank D(m))`, `D(m) = L(m)(R_∞)`, level order.
    pub fibers: Vec<(MultiIndex, usize)>,
    /// `‖S² − S‖` for `S = Σ_m D(m)`; zero iff the fibers are orthogonal.
    pub orthogonality_residual: T,
    /// Largest `‖P_1^j D(m)‖` over `j ∈ α` and fibers with `m_j = 0`.
    pub kernel_orthogonality_residual: T,
    /// Number of closure iterations needed by the kernel computations.
    pub quantifier_bound: usize,
}

/// One reducing summand of a decomposition.
#[derive(Debug, Clone)]
pub struct Summand<T: Real> {
    /// Directions acting as a shift on this summand. In the weakly induced
    /// mode the full direction set labels the weakly induced remainder.
    pub alpha: Vec<usize>,
    /// Projection onto the summand.
    pub projection: SubspaceProjection<T>,
    /// Largest residual of the reducing-subspace checks.
    pub reducing_residual: T,
    /// Largest full-coisometry residual over the directions outside `alpha`.
    pub coisometry_residual: T,
    /// Induced certificate of the `alpha`-directions on the summand, when
    /// the decomposition mode establishes one.
    pub certificate: Option<InducedCertificate<T>>,
    /// Construction record when the summand came from the maximal-summand
    /// machinery.
    pub support: Option<SummandCertificate<T>>,
}

/// One weakly induced condition: a product direction set `γ`, the meet of
/// the complementary kernels, and the induced certificate of the compressed
/// product representation.
#[derive(Debug, Clone)]
pub struct WeakPart<T: Real> {
    /// The product direction set `γ`.
    pub gamma: Vec<usize>,
    /// `⋀_{j∉γ} K^{(j)}` inside the remainder (the identity for `γ` full).
    pub kernel_meet: SubspaceProjection<T>,
    /// Certificate that `(σ, ⊗_{i∈γ} T^{(i)})` compressed to the meet is
    /// induced.
    pub certificate: InducedCertificate<T>,
}

/// Which decomposition produced a [`DecompositionReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionMode {
    /// The `2ᵏ`-summand decomposition of a doubly commuting representation.
    DoublyCommuting,
    /// Maximal `α`-summands of a general isometric representation; their
    /// sum may be a proper subspace.
    General,
    /// Proper maximal summands plus the weakly induced remainder
    /// (`k = 2, 3`).
    WeaklyInduced,
}

/// Outcome of a Wold-type decomposition.
#[derive(Debug, Clone)]
pub struct DecompositionReport<T: Real> {
    /// The decomposition that was performed.
    pub mode: DecompositionMode,
    /// Summands in lexicographic order of their direction sets.
    pub summands: Vec<Summand<T>>,
    /// The weakly induced conditions (empty unless the mode is
    /// [`DecompositionMode::WeaklyInduced`]).
    pub weak_parts: Vec<WeakPart<T>>,
    /// `‖Σ_α P_α − I‖`; only gated in the complete modes.
    pub residual_sum: T,
    /// Largest `‖P_α P_α′‖` over distinct summands.
    pub orthogonality_residual: T,
    /// `‖⋀_i P_∞^i − P_∞‖`, the gap between the per-direction limits and
    /// the joint limit.
    pub p_infty_gap: T,
    /// Every residual check the decomposition ran.
    pub checks: ValidationReport,
}

/// Columns of `parts` side by side; `rows` fixes the row count when the
/// list is empty.
fn hstack<T: Real>(rows: usize, parts: &[CMatrix<T>]) -> CMatrix<T> {
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut off = 0;
    for p in parts {
        out.view_mut((0, off), (p.nrows(), p.ncols())).copy_from(p);
        off += p.ncols();
    }
    out
}

/// Human label `{0,2}` for a direction set, `∅` when empty.
pub(crate) fn set_label(dirs: &[usize]) -> String {
    if dirs.is_empty() {
        "∅".into()
    } else {
        let inner: Vec<String> = dirs.iter().map(|d| d.to_string()).collect();
        format!("{{{}}}", inner.join(","))
    }
}

/// All subsets of `{0, …, k−1}` as sorted vectors, in lexicographic order.
pub(crate) fn subsets_lex(k: usize) -> Vec<Vec<usize>> {
    let mut subs: Vec<Vec<usize>> = (0..1usize << k)
        .map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    subs.sort();
    subs
}

fn residual_from(report: &ValidationReport) -> f64 {
    report.max_residual
}

fn conv<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("residual representable in the scalar type")
}

/// Projection onto `T̃^{(i)}(E_i ⊗ ran P)`.
///
/// For an isometric representation this equals `L_i(P)`, computed here as a
/// range so that each step yields an exact projection.
fn l_range_step<T: Real>(
    rep: &CovariantRep<T>,
    i: usize,
    p: &SubspaceProjection<T>,
    pol: &TolerancePolicy<T>,
) -> Result<SubspaceProjection<T>> {
    let b = p.basis()?;
    let d = rep.system().corr(i).dim();
    let c = rep.tmap_alg(i) * eye::<T>(d).kronecker(&b);
    range_projection(&c, pol)
}

/// One range step of `L_i` for every direction in `dirs`, in order.
fn composite_step<T: Real>(
    rep: &CovariantRep<T>,
    dirs: &[usize],
    p: &SubspaceProjection<T>,
    pol: &TolerancePolicy<T>,
) -> Result<SubspaceProjection<T>> {
    let mut q = p.clone();
    for &i in dirs {
        q = l_range_step(rep, i, &q, pol)?;
    }
    Ok(q)
}

/// The sub-representation keeping only the directions in `dirs` (sorted
/// ascending), over the product system they generate.
fn direction_sub_rep<T: Real>(
    rep: &CovariantRep<T>,
    dirs: &[usize],
    pol: &TolerancePolicy<T>,
) -> Result<CovariantRep<T>> {
    let corrs: Vec<Correspondence<T>> = dirs
        .iter()
        .map(|&i| rep.system().corr(i).clone())
        .collect();
    let mut flips = Vec::new();
    for a in 0..dirs.len() {
        for b in 0..a {
            let f = rep
                .system()
                .flip_alg(dirs[a], dirs[b])
                .ok_or_else(|| {
                    Error::InvalidStructure(format!("missing flip ({},{})", dirs[a], dirs[b]))
                })?
                .clone();
            flips.push(((a, b), f));
        }
    }
    let system = ProductSystem::new(corrs, flips, pol)?;
    let tmaps: Vec<CMatrix<T>> = dirs.iter().map(|&i| rep.tmap_alg(i).clone()).collect();
    CovariantRep::new(
        system,
        rep.sigma().clone(),
        tmaps,
        rep.window().cloned(),
        pol,
    )
}

/// The decreasing limit `P_∞^i = lim_l L_i^l(I)`, the projection onto the
/// largest subspace on which direction `i` acts fully coisometrically.
pub fn p_infty_i<T: Real>(
    rep: &CovariantRep<T>,
    i: usize,
    pol: &TolerancePolicy<T>,
) -> Result<SubspaceProjection<T>> {
    if i >= rep.k() {
        return Err(Error::DimensionMismatch {
            context: "p_infty_i direction".into(),
            expected: format!("< {}", rep.k()),
            found: format!("{i}"),
        });
    }
    let start = SubspaceProjection::identity(rep.dim_h(), pol.abs_tol);
    stabilized_limit(|p| l_range_step(rep, i, p, pol), &start, pol)
}

/// The joint limit `P_∞ = lim_{n ∈ ℕ₀ᵏ} L(n)(I)` over the directed set of
/// multi-indices, together with the gap `‖⋀_i P_∞^i − P_∞‖`.
///
/// The joint limit is always dominated by the meet of the per-direction
/// limits; for doubly commuting representations the two coincide and the
/// gap is a pure numerical residual.
pub fn p_infty<T: Real>(
    rep: &CovariantRep<T>,
    pol: &TolerancePolicy<T>,
) -> Result<(SubspaceProjection<T>, T)> {
    let k = rep.k();
    let dirs: Vec<usize> = (0..k).collect();
    let start = SubspaceProjection::identity(rep.dim_h(), pol.abs_tol);
    let joint = stabilized_limit(|p| composite_step(rep, &dirs, p, pol), &start, pol)?;
    let per: Vec<SubspaceProjection<T>> = (0..k)
        .map(|i| p_infty_i(rep, i, pol))
        .collect::<Result<Vec<_>>>()?;
    let met = meet_all(&per, pol)?;
    let gap = op_norm(&(met.matrix() - joint.matrix()))?;
    Ok((joint, gap))
}

/// Projection onto the largest reducing subspace on which every direction
/// acts fully coisometrically.
pub fn max_fully_coisometric<T: Real>(
    rep: &CovariantRep<T>,
    pol: &TolerancePolicy<T>,
) -> Result<SubspaceProjection<T>> {
    Ok(p_infty(rep, pol)?.0)
}

/// The lattice projection `P(n) = L(n)(I)` of a doubly commuting isometric
/// representation; these satisfy `P(m) P(n) = P(m ∨ n)`.
pub fn lattice_p<T: Real>(
    rep: &CovariantRep<T>,
    n: &[usize],
    tol: T,
    pol: &TolerancePolicy<T>,
) -> Result<SubspaceProjection<T>> {
    if n.len() != rep.k() {
        return Err(Error::DimensionMismatch {
            context: "lattice projection multi-index".into(),
            expected: format!("{}", rep.k()),
            found: format!("{}", n.len()),
        });
    }
    let class = rep.classify(tol)?;
    if !class.is_isometric || !class.is_doubly_commuting {
        return Err(Error::InvalidStructure(
            "lattice projections need a doubly commuting isometric representation".into(),
        ));
    }
    let mut p = SubspaceProjection::identity(rep.dim_h(), pol.abs_tol);
    for i in (0..rep.k()).rev() {
        for _ in 0..n[i] {
            p = l_range_step(rep, i, &p, pol)?;
        }
    }
    Ok(p)
}

/// The one-direction kernel `K^{(j)}` of eq. the module docs, together with
/// the number of closure iterations that were needed.
///
/// A vector `h` lies in `K^{(j)}` iff `T̃(m)(ξ ⊗ h) ⊥ ran T̃^{(j)}` for every
/// multi-index `m` without a `j`-component and every `ξ ∈ 𝔼(m)`. The
/// orthogonal complement of `K^{(j)}` is therefore the smallest subspace
/// that contains `σ(A)·ran T̃^{(j)}` and is invariant under the adjoint
/// slices `h ↦ T^{(i)}(e_x)^* h` of every other direction; that subspace is
/// grown until its rank repeats, which in finite dimension is exact.
pub fn one_direction_kernel<T: Real>(
    rep: &CovariantRep<T>,
    j: usize,
    pol: &TolerancePolicy<T>,
) -> Result<(SubspaceProjection<T>, usize)> {
    let k = rep.k();
    let h = rep.dim_h();
    if j >= k {
        return Err(Error::DimensionMismatch {
            context: "one_direction_kernel direction".into(),
            expected: format!("< {k}"),
            found: format!("{j}"),
        });
    }
    if h == 0 {
        return Ok((SubspaceProjection::zero(0, pol.abs_tol), 0));
    }
    let range_j = range_projection(rep.tmap_alg(j), pol)?;
    let seed_basis = range_j.basis()?;
    let algebra = rep.system().algebra().clone();
    let mut seed_cols = Vec::new();
    for (b, p, q) in algebra.unit_indices() {
        seed_cols.push(rep.sigma().unit_image(b, p, q) * &seed_basis);
    }
    let mut space = range_projection(&hstack(h, &seed_cols), pol)?;
    let mut levels = 0usize;
    loop {
        if levels > pol.max_iterations {
            return Err(Error::IterationCap {
                context: "one_direction_kernel closure".into(),
                cap: pol.max_iterations,
            });
        }
        let basis = space.basis()?;
        let mut cols = vec![basis.clone()];
        for i in 0..k {
            if i == j {
                continue;
            }
            let t = rep.tmap_alg(i);
            for s in 0..rep.system().corr(i).dim() {
                cols.push(t.view((0, s * h), (h, h)).adjoint() * &basis);
            }
        }
        let grown = range_projection(&hstack(h, &cols), pol)?;
        if grown.rank() == space.rank() {
            break;
        }
        space = grown;
        levels += 1;
    }
    Ok((space.complement(), levels))
}

/// Decides whether `rep` is induced and constructs the certificate.
///
/// Requires an isometric (and, for `k ≥ 2`, doubly commuting)
/// representation that is pure in every direction (`P_∞^i = 0`). The fibers
/// `Q(n)` must resolve the identity and the transport map must be unitary
/// and intertwining within `tol`; any breach is returned as
/// [`Error::FailedChecks`].
pub fn induced_certificate<T: Real>(
    rep: &CovariantRep<T>,
    tol: T,
    pol: &TolerancePolicy<T>,
) -> Result<InducedCertificate<T>> {
    let k = rep.k();
    let h = rep.dim_h();
    if h == 0 {
        let basis = CMatrix::zeros(0, 0);
        let rep0 = rep.sigma().compress(&basis)?;
        let multiplicity = multiplicity_vector(&rep0, pol)?;
        return Ok(InducedCertificate {
            wandering: SubspaceProjection::zero(0, pol.abs_tol),
            wandering_basis: basis,
            wandering_rep: rep0,
            multiplicity,
            realized: Vec::new(),
            level_bound: 0,
            unitary: CMatrix::zeros(0, 0),
            unitary_residual: T::zero(),
            intertwining_residual: T::zero(),
        });
    }
    let class = rep.classify(tol)?;
    if !class.is_isometric {
        return Err(Error::InvalidStructure(
            "induced certificate needs an isometric representation".into(),
        ));
    }
    if k >= 2 && !class.is_doubly_commuting {
        return Err(Error::InvalidStructure(
            "induced certificate needs a doubly commuting representation".into(),
        ));
    }
    let mut purity = ValidationReport::new("induced certificate");
    for i in 0..k {
        let p = p_infty_i(rep, i, pol)?;
        if p.rank() > 0 {
            purity.fail(format!(
                "direction {i} purity: lim L_{i}^l(I) has rank {}",
                p.rank()
            ));
        }
    }
    let mut report = purity.into_result()?;

    // Decreasing power chains P_l^i = L_i^l(I) down to zero.
    let mut powers: Vec<Vec<SubspaceProjection<T>>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut chain = vec![SubspaceProjection::identity(h, pol.abs_tol)];
        while chain.last().expect("nonempty chain").rank() > 0 {
            if chain.len() > pol.max_iterations {
                return Err(Error::IterationCap {
                    context: format!("induced certificate power chain {i}"),
                    cap: pol.max_iterations,
                });
            }
            let next = l_range_step(rep, i, chain.last().expect("nonempty chain"), pol)?;
            chain.push(next);
        }
        powers.push(chain);
    }
    let lens: Vec<usize> = powers.iter().map(|c| c.len() - 1).collect();

    // Wandering fibers Q(n) over the box Π_i {0, …, lens_i − 1}.
    let slack = pol.abs_tol * T::from_f64(100.0).expect("slack");
    let mut realized_q: Vec<(MultiIndex, SubspaceProjection<T>)> = Vec::new();
    let mut sum = CMatrix::<T>::zeros(h, h);
    let mut counter: MultiIndex = vec![0; k];
    'boxes: loop {
        let mut prod: CMatrix<T> = eye(h);
        for i in 0..k {
            let d = powers[i][counter[i]].matrix() - powers[i][counter[i] + 1].matrix();
            prod = prod * d;
        }
        sum += &prod;
        let q = SubspaceProjection::from_matrix_in(prod, slack, "wandering fiber")?;
        if q.rank() > 0 {
            realized_q.push((counter.clone(), q));
        }
        for pos in (0..k).rev() {
            counter[pos] += 1;
            if counter[pos] < lens[pos] {
                continue 'boxes;
            }
            counter[pos] = 0;
        }
        break;
    }
    report.check(
        "wandering fibers resolve the identity",
        op_norm(&(sum - eye::<T>(h)))?,
        tol,
    );
    realized_q.sort_by_key(|(n, _)| (mi_total(n), n.clone()));
    let mut report = report.into_result()?;

    let zero_idx: MultiIndex = vec![0; k];
    let wandering = match realized_q.iter().find(|(n, _)| *n == zero_idx) {
        Some((_, q)) => q.clone(),
        None => {
            report.fail("wandering subspace is zero on a nonzero space");
            report.into_result()?;
            return Err(Error::InvalidStructure(
                "wandering subspace is zero on a nonzero space".into(),
            ));
        }
    };
    let b0 = wandering.basis()?;
    let r = b0.ncols();
    let mut sigma_comm = T::zero();
    let algebra = rep.system().algebra().clone();
    for (b, p, q) in algebra.unit_indices() {
        let s = rep.sigma().unit_image(b, p, q);
        sigma_comm = Float::max(
            sigma_comm,
            op_norm(&(s * wandering.matrix() - wandering.matrix() * s))?,
        );
    }
    report.check("algebra reduces the wandering subspace", sigma_comm, tol);
    let sigma0 = rep.sigma().compress(&b0)?;
    let multiplicity = multiplicity_vector(&sigma0, pol)?;

    // Fiber data: V_n = T̃(n)·(I ⊗ B₀) on algebraic coordinates and the
    // tensor space 𝔼(n) ⊗_{σ₀} K it descends to.
    let mut vmats = Vec::with_capacity(realized_q.len());
    let mut spaces = Vec::with_capacity(realized_q.len());
    let mut realized = Vec::with_capacity(realized_q.len());
    let mut index_of: HashMap<MultiIndex, usize> = HashMap::new();
    for (idx, (n, q)) in realized_q.iter().enumerate() {
        let piece = rep.system().build_piece(n, pol)?;
        let dn = piece.corr().dim();
        let v = rep.tilde_t_amb(n, pol)? * eye::<T>(dn).kronecker(&b0);
        let w = internal_tensor(piece.corr(), &sigma0, pol)?;
        if w.hilbert_dim() != q.rank() {
            report.fail(format!(
                "fiber {n:?} dimension: expected {} from the tensor space, found rank {}",
                w.hilbert_dim(),
                q.rank()
            ));
        }
        index_of.insert(n.clone(), idx);
        realized.push((n.clone(), w.hilbert_dim()));
        vmats.push(v);
        spaces.push(w);
    }
    let total: usize = realized.iter().map(|(_, d)| d).sum();
    if total != h {
        report.fail(format!(
            "fiber dimensions sum to {total}, ambient dimension is {h}"
        ));
    }
    let mut report = report.into_result()?;

    let mut unitary = CMatrix::<T>::zeros(h, total);
    let mut off = 0;
    for (v, w) in vmats.iter().zip(&spaces) {
        let u_n = v * w.lift();
        unitary
            .view_mut((0, off), (h, w.hilbert_dim()))
            .copy_from(&u_n);
        off += w.hilbert_dim();
    }
    let unitary_residual = Float::max(
        op_norm(&(unitary.adjoint() * &unitary - eye::<T>(total)))?,
        op_norm(&(&unitary * unitary.adjoint() - eye::<T>(h)))?,
    );
    report.check("transport map unitary", unitary_residual, tol);

    // Intertwining: σ(a) V_n = V_n (φ_n(a) ⊗ I) and
    // T̃^{(i)} (I ⊗ V_n) = V_{n+e_i} (merge ⊗ I).
    let mut intertwining = T::zero();
    for (idx, (n, _)) in realized.iter().enumerate() {
        let piece = rep.system().build_piece(n, pol)?;
        for (b, p, q) in algebra.unit_indices() {
            let unit = algebra.unit::<T>(b, p, q);
            let phi = piece.corr().left_of(&unit);
            let lhs = rep.sigma().unit_image(b, p, q) * &vmats[idx];
            let rhs = &vmats[idx] * phi.kronecker(&eye::<T>(r));
            intertwining = Float::max(intertwining, op_norm(&(lhs - rhs))?);
        }
        let skip = rep
            .window()
            .map_or(false, |w| (mi_total(n) + 1) * w.stride() > w.bound());
        if skip {
            continue;
        }
        for i in 0..k {
            let di = rep.system().corr(i).dim();
            let dn = piece.corr().dim();
            let m = mi_add(n, &mi_unit(k, i));
            let (_, s) = corr_tensor(rep.system().corr(i), piece.corr(), pol)?;
            let g_amb = rep.system().merge_iso(&mi_unit(k, i), n, pol)? * s.embed();
            let lhs = rep.tmap_alg(i) * eye::<T>(di).kronecker(&vmats[idx]);
            let rhs = match index_of.get(&m) {
                Some(&mi) => &vmats[mi] * g_amb.kronecker(&eye::<T>(r)),
                None => CMatrix::zeros(h, di * dn * r),
            };
            intertwining = Float::max(intertwining, op_norm(&(lhs - rhs))?);
        }
    }
    report.check("shift and algebra intertwining", intertwining, tol);
    report.into_result()?;

    let level_bound = realized.iter().map(|(n, _)| mi_total(n)).max().unwrap_or(0);
    Ok(InducedCertificate {
        wandering,
        wandering_basis: b0,
        wandering_rep: sigma0,
        multiplicity,
        realized,
        level_bound,
        unitary,
        unitary_residual,
        intertwining_residual: intertwining,
    })
}

/// The largest reducing subspace on which the directions in `alpha` form an
/// induced representation and the remaining directions act fully
/// coisometrically, built without any double-commutation assumption.
pub fn max_alpha_summand<T: Real>(
    rep: &CovariantRep<T>,
    alpha: &[usize],
    tol: T,
    pol: &TolerancePolicy<T>,
) -> Result<(SubspaceProjection<T>, SummandCertificate<T>)> {
    let k = rep.k();
    let h = rep.dim_h();
    if alpha.windows(2).any(|w| w[0] >= w[1]) || alpha.iter().any(|&j| j >= k) {
        return Err(Error::InvalidStructure(format!(
            "direction set {:?} is not a strictly increasing subset of 0..{k}",
            alpha
        )));
    }
    if h == 0 {
        let zero = SubspaceProjection::zero(0, pol.abs_tol);
        let cert = SummandCertificate {
            alpha: alpha.to_vec(),
            kernels: vec![zero.clone(); alpha.len()],
            base: zero.clone(),
            stable: zero.clone(),
            fibers: Vec::new(),
            orthogonality_residual: T::zero(),
            kernel_orthogonality_residual: T::zero(),
            quantifier_bound: 0,
        };
        return Ok((zero, cert));
    }
    let class = rep.classify(tol)?;
    if !class.is_isometric {
        return Err(Error::InvalidStructure(
            "maximal summands need an isometric representation".into(),
        ));
    }

    let mut kernels = Vec::with_capacity(alpha.len());
    let mut quantifier_bound = 0usize;
    for &j in alpha {
        let (kj, lv) = one_direction_kernel(rep, j, pol)?;
        quantifier_bound = quantifier_bound.max(lv);
        kernels.push(kj);
    }
    let base = if kernels.is_empty() {
        SubspaceProjection::identity(h, pol.abs_tol)
    } else {
        meet_all(&kernels, pol)?
    };
    let beta: Vec<usize> = (0..k).filter(|i| !alpha.contains(i)).collect();
    let stable = if beta.is_empty() || base.rank() == 0 {
        base.clone()
    } else {
        stabilized_limit(|p| composite_step(rep, &beta, p, pol), &base, pol)?
    };

    // Fiber lattice D(m) = L(m)(R_∞) over m ∈ ℕ₀^{k,α}, breadth first by
    // total level; every multi-index is generated once, from lowering its
    // leading nonzero α-direction.
    let ranges: Vec<(usize, SubspaceProjection<T>)> = alpha
        .iter()
        .map(|&j| Ok((j, range_projection(rep.tmap_alg(j), pol)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut fibers: Vec<(MultiIndex, usize)> = Vec::new();
    let mut sum = CMatrix::<T>::zeros(h, h);
    let mut kernel_orth = T::zero();
    let mut total_rank = 0usize;
    let mut current: Vec<(MultiIndex, SubspaceProjection<T>)> = if stable.rank() > 0 {
        vec![(vec![0; k], stable.clone())]
    } else {
        Vec::new()
    };
    let mut level = 0usize;
    while !current.is_empty() {
        for (m, d) in &current {
            fibers.push((m.clone(), d.rank()));
            total_rank += d.rank();
            sum += d.matrix();
            for (j, p1j) in &ranges {
                if m[*j] == 0 {
                    kernel_orth =
                        Float::max(kernel_orth, op_norm(&(p1j.matrix() * d.matrix()))?);
                }
            }
        }
        if total_rank > h {
            return Err(Error::RankInconsistency {
                context: "maximal summand fibers".into(),
                detail: format!("fiber ranks sum to {total_rank} in dimension {h}"),
            });
        }
        let mut next = Vec::new();
        for (m, d) in &current {
            let lead = alpha
                .iter()
                .copied()
                .find(|&i| m[i] > 0)
                .unwrap_or(usize::MAX);
            for &i in alpha {
                if i > lead {
                    break;
                }
                let child = l_range_step(rep, i, d, pol)?;
                if child.rank() > 0 {
                    next.push((mi_add(m, &mi_unit(k, i)), child));
                }
            }
        }
        current = next;
        level += 1;
        if level > pol.max_iterations {
            return Err(Error::IterationCap {
                context: "maximal summand fiber lattice".into(),
                cap: pol.max_iterations,
            });
        }
    }
    fibers.sort_by_key(|(m, _)| (mi_total(m), m.clone()));
    let orthogonality_residual = op_norm(&(&sum * &sum - &sum))?;
    let slack = pol.abs_tol * T::from_f64(100.0 * fibers.len().max(1) as f64).expect("slack");
    let projection = SubspaceProjection::from_matrix_in(sum, slack, "maximal summand")?;
    let cert = SummandCertificate {
        alpha: alpha.to_vec(),
        kernels,
        base,
        stable,
        fibers,
        orthogonality_residual,
        kernel_orthogonality_residual: kernel_orth,
        quantifier_bound,
    };
    Ok((projection, cert))
}

/// Wold decomposition of a doubly commuting isometric representation into
/// the `2ᵏ` summands `P_α = Π_{j∈α}(I − P_∞^j) Π_{i∉α} P_∞^i`.
///
/// Each summand is certified reducing, fully coisometric in the directions
/// outside `α`, and induced in the directions of `α`; the summands are
/// certified mutually orthogonal with sum the identity. Any check beyond
/// `tol` aborts with [`Error::FailedChecks`].
pub fn wold_dc<T: Real>(
    rep: &CovariantRep<T>,
    tol: T,
    pol: &TolerancePolicy<T>,
) -> Result<DecompositionReport<T>> {
    let class = rep.classify(tol)?;
    if !class.is_isometric {
        return Err(Error::InvalidStructure(
            "the doubly commuting decomposition needs an isometric representation".into(),
        ));
    }
    if !class.is_doubly_commuting {
        return Err(Error::InvalidStructure(
            "representation is not doubly commuting; use the maximal summand machinery".into(),
        ));
    }
    let k = rep.k();
    let h = rep.dim_h();
    let mut checks = ValidationReport::new("doubly commuting decomposition");
    let (_, gap) = p_infty(rep, pol)?;
    checks.check("per-direction limits meet the joint limit", gap, tol);
    let pinf: Vec<SubspaceProjection<T>> = (0..k)
        .map(|i| p_infty_i(rep, i, pol))
        .collect::<Result<Vec<_>>>()?;
    let comp: Vec<SubspaceProjection<T>> = pinf.iter().map(|p| p.complement()).collect();

    let mut summands: Vec<Summand<T>> = Vec::new();
    let mut sum_mat = CMatrix::<T>::zeros(h, h);
    for alpha in subsets_lex(k) {
        let label = set_label(&alpha);
        let factors: Vec<&SubspaceProjection<T>> = (0..k)
            .map(|i| if alpha.contains(&i) { &comp[i] } else { &pinf[i] })
            .collect();
        let p = commuting_product(&factors, pol)?;
        let red = rep.is_reducing(&p, tol);
        let reducing_residual: T = conv(residual_from(&red));
        checks.check(format!("summand {label} reducing"), reducing_residual, tol);
        let sub = rep.restrict(&p, tol, pol)?;
        let mut coiso = T::zero();
        if p.rank() > 0 {
            let subclass = sub.classify(tol)?;
            for i in 0..k {
                if alpha.contains(&i) {
                    continue;
                }
                let v = &subclass.fully_coisometric[i];
                coiso = Float::max(coiso, v.residual);
                checks.check(
                    format!("summand {label}: direction {i} fully coisometric"),
                    v.residual,
                    tol,
                );
            }
        }
        let certificate = if !alpha.is_empty() && p.rank() > 0 {
            let alpha_rep = direction_sub_rep(&sub, &alpha, pol)?;
            Some(induced_certificate(&alpha_rep, tol, pol)?)
        } else {
            None
        };
        sum_mat += p.matrix();
        summands.push(Summand {
            alpha,
            projection: p,
            reducing_residual,
            coisometry_residual: coiso,
            certificate,
            support: None,
        });
    }
    let residual_sum = op_norm(&(&sum_mat - eye::<T>(h)))?;
    checks.check("summands resolve the identity", residual_sum, tol);
    let orthogonality_residual = pairwise_orthogonality(&summands)?;
    checks.check("summands pairwise orthogonal", orthogonality_residual, tol);
    let checks = checks.into_result()?;
    Ok(DecompositionReport {
        mode: DecompositionMode::DoublyCommuting,
        summands,
        weak_parts: Vec::new(),
        residual_sum,
        orthogonality_residual,
        p_infty_gap: gap,
        checks,
    })
}

fn pairwise_orthogonality<T: Real>(summands: &[Summand<T>]) -> Result<T> {
    let mut worst = T::zero();
    for a in 0..summands.len() {
        for b in 0..a {
            let prod = summands[a].projection.matrix() * summands[b].projection.matrix();
            worst = Float::max(worst, op_norm(&prod)?);
        }
    }
    Ok(worst)
}

/// All `2ᵏ` maximal `α`-summands of a general isometric representation.
///
/// The summands are certified reducing, mutually orthogonal, and fully
/// coisometric outside their direction sets, but their sum is allowed to be
/// a proper subspace; `residual_sum` reports `‖Σ_α P_α − I‖` without gating
/// it.
pub fn max_doubly_commuting<T: Real>(
    rep: &CovariantRep<T>,
    tol: T,
    pol: &TolerancePolicy<T>,
) -> Result<DecompositionReport<T>> {
    let k = rep.k();
    let h = rep.dim_h();
    let mut checks = ValidationReport::new("maximal summand decomposition");
    let (joint, gap) = p_infty(rep, pol)?;
    let mut summands: Vec<Summand<T>> = Vec::new();
    let mut sum_mat = CMatrix::<T>::zeros(h, h);
    for alpha in subsets_lex(k) {
        let label = set_label(&alpha);
        let (p, cert) = max_alpha_summand(rep, &alpha, tol, pol)?;
        let red = rep.is_reducing(&p, tol);
        let reducing_residual: T = conv(residual_from(&red));
        checks.check(format!("summand {label} reducing"), reducing_residual, tol);
        checks.check(
            format!("summand {label} fiber orthogonality"),
            cert.orthogonality_residual,
            tol,
        );
        checks.check(
            format!("summand {label} fibers avoid the shifted ranges"),
            cert.kernel_orthogonality_residual,
            tol,
        );
        if alpha.is_empty() {
            checks.check(
                "empty summand equals the joint limit",
                op_norm(&(p.matrix() - joint.matrix()))?,
                tol,
            );
        }
        let sub = rep.restrict(&p, tol, pol)?;
        let mut coiso = T::zero();
        if p.rank() > 0 {
            let subclass = sub.classify(tol)?;
            for i in 0..k {
                if alpha.contains(&i) {
                    continue;
                }
                let v = &subclass.fully_coisometric[i];
                coiso = Float::max(coiso, v.residual);
                checks.check(
                    format!("summand {label}: direction {i} fully coisometric"),
                    v.residual,
                    tol,
                );
            }
        }
        sum_mat += p.matrix();
        summands.push(Summand {
            alpha,
            projection: p,
            reducing_residual,
            coisometry_residual: coiso,
            certificate: None,
            support: Some(cert),
        });
    }
    let residual_sum = op_norm(&(&sum_mat - eye::<T>(h)))?;
    let orthogonality_residual = pairwise_orthogonality(&summands)?;
    checks.check("summands pairwise orthogonal", orthogonality_residual, tol);
    let checks = checks.into_result()?;
    Ok(DecompositionReport {
        mode: DecompositionMode::General,
        summands,
        weak_parts: Vec::new(),
        residual_sum,
        orthogonality_residual,
        p_infty_gap: gap,
        checks,
    })
}

/// Weakly induced decomposition for `k = 2` or `k = 3` directions.
///
/// Splits `H` into the proper maximal summands plus their reducing
/// orthogonal complement, and certifies the complement *weakly induced*:
/// for every nonempty direction set `γ`, the product representation
/// `(σ, ⊗_{i∈γ} T^{(i)})` compressed to `⋀_{j∉γ} K^{(j)}` (kernels taken in
/// the complement) is induced. Singleton proper summands additionally carry
/// the induced certificate of their own direction.
pub fn weakly_induced_decompose<T: Real>(
    rep: &CovariantRep<T>,
    tol: T,
    pol: &TolerancePolicy<T>,
) -> Result<DecompositionReport<T>> {
    let k = rep.k();
    if !(2..=3).contains(&k) {
        return Err(Error::Unsupported(format!(
            "the weakly induced decomposition covers 2 or 3 directions, got {k}"
        )));
    }
    let class = rep.classify(tol)?;
    if !class.is_isometric {
        return Err(Error::InvalidStructure(
            "the weakly induced decomposition needs an isometric representation".into(),
        ));
    }
    let h = rep.dim_h();
    let mut checks = ValidationReport::new("weakly induced decomposition");
    let (_, gap) = p_infty(rep, pol)?;
    let all: Vec<usize> = (0..k).collect();

    let mut summands: Vec<Summand<T>> = Vec::new();
    let mut sum_mat = CMatrix::<T>::zeros(h, h);
    for alpha in subsets_lex(k) {
        if alpha == all {
            continue;
        }
        let label = set_label(&alpha);
        let (p, cert) = max_alpha_summand(rep, &alpha, tol, pol)?;
        let red = rep.is_reducing(&p, tol);
        let reducing_residual: T = conv(residual_from(&red));
        checks.check(format!("summand {label} reducing"), reducing_residual, tol);
        let sub = rep.restrict(&p, tol, pol)?;
        let mut coiso = T::zero();
        if p.rank() > 0 {
            let subclass = sub.classify(tol)?;
            for i in 0..k {
                if alpha.contains(&i) {
                    continue;
                }
                let v = &subclass.fully_coisometric[i];
                coiso = Float::max(coiso, v.residual);
                checks.check(
                    format!("summand {label}: direction {i} fully coisometric"),
                    v.residual,
                    tol,
                );
            }
        }
        let certificate = if alpha.len() == 1 && p.rank() > 0 {
            let alpha_rep = direction_sub_rep(&sub, &alpha, pol)?;
            Some(induced_certificate(&alpha_rep, tol, pol)?)
        } else {
            None
        };
        sum_mat += p.matrix();
        summands.push(Summand {
            alpha,
            projection: p,
            reducing_residual,
            coisometry_residual: coiso,
            certificate,
            support: Some(cert),
        });
    }

    // Remainder: the reducing complement of all proper summands.
    let slack =
        pol.abs_tol * T::from_f64(100.0 * summands.len().max(1) as f64).expect("slack");
    let remainder = SubspaceProjection::from_matrix_in(
        eye::<T>(h) - &sum_mat,
        slack,
        "weakly induced remainder",
    )?;
    let red = rep.is_reducing(&remainder, tol);
    let remainder_reducing: T = conv(residual_from(&red));
    checks.check("remainder reducing", remainder_reducing, tol);
    let sub = rep.restrict(&remainder, tol, pol)?;

    let mut kernels = Vec::with_capacity(k);
    for j in 0..k {
        kernels.push(one_direction_kernel(&sub, j, pol)?.0);
    }
    let mut weak_parts: Vec<WeakPart<T>> = Vec::new();
    for gamma in subsets_lex(k) {
        if gamma.is_empty() {
            continue;
        }
        let label = set_label(&gamma);
        let others: Vec<SubspaceProjection<T>> = (0..k)
            .filter(|j| !gamma.contains(j))
            .map(|j| kernels[j].clone())
            .collect();
        let kernel_meet = if others.is_empty() {
            SubspaceProjection::identity(sub.dim_h(), pol.abs_tol)
        } else {
            meet_all(&others, pol)?
        };
        let one: MultiIndex = gamma
            .iter()
            .fold(vec![0; k], |acc, &i| mi_add(&acc, &mi_unit(k, i)));
        let piece = sub.system().build_piece(&one, pol)?;
        let wrap_sys = ProductSystem::new(vec![piece.corr().clone()], Vec::new(), pol)?;
        let t_in = sub.tilde_t_amb(&one, pol)?;
        let wrap_window = sub.window().map(|w| w.scaled(gamma.len()));
        let wrapper = CovariantRep::new(
            wrap_sys,
            sub.sigma().clone(),
            vec![t_in],
            wrap_window,
            pol,
        )?;
        let red = wrapper.is_reducing(&kernel_meet, tol);
        checks.check(
            format!("product {label}: kernel meet reducing"),
            conv::<T>(residual_from(&red)),
            tol,
        );
        let wrapped = wrapper.restrict(&kernel_meet, tol, pol)?;
        let certificate = induced_certificate(&wrapped, tol, pol)?;
        checks.check(
            format!("product {label}: compression induced"),
            Float::max(
                certificate.unitary_residual,
                certificate.intertwining_residual,
            ),
            tol,
        );
        weak_parts.push(WeakPart {
            gamma,
            kernel_meet,
            certificate,
        });
    }
    summands.push(Summand {
        alpha: all,
        projection: remainder,
        reducing_residual: remainder_reducing,
        coisometry_residual: T::zero(),
        certificate: None,
        support: None,
    });
    let full_sum = &sum_mat + summands.last().expect("remainder").projection.matrix();
    let residual_sum = op_norm(&(full_sum - eye::<T>(h)))?;
    checks.check("summands resolve the identity", residual_sum, tol);
    let orthogonality_residual = pairwise_orthogonality(&summands)?;
    checks.check("summands pairwise orthogonal", orthogonality_residual, tol);
    let checks = checks.into_result()?;
    Ok(DecompositionReport {
        mode: DecompositionMode::WeaklyInduced,
        summands,
        weak_parts,
        residual_sum,
        orthogonality_residual,
        p_infty_gap: gap,
        checks,
    })
}
