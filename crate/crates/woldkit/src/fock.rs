//! Fock modules and induced (Fock shift) representations.
//!
//! The Fock module of a product system `𝔼` over `ℕ₀ᵏ` is the direct sum
//! `F(𝔼) = ⊕_{n ∈ ℕ₀ᵏ} 𝔼(n)` with the canonical left action `φ_∞` of the
//! coefficient algebra and, for every `ξ ∈ E_i`, the creation operator
//! `T_ξ(η) = ξ ⊗ η` landing one grading step higher. Tensoring with a
//! representation `π : A → B(K)` yields the *induced representation*
//!
//! ```text
//!     σ(a) = φ_∞(a) ⊗ I_K,       T^{(i)}(ξ) = T_ξ ⊗ I_K
//! ```
//!
//! on `⊕_n 𝔼(n) ⊗_π K`, the universal example of a doubly commuting pure
//! isometric representation.
//!
//! Two finiteness regimes keep everything computable:
//!
//! * **Exact-finite.** When every `𝔼(n)` vanishes beyond a finite frontier
//!   (detected by [`frontier`]), the whole Fock module is materialized and
//!   [`induce`] returns an exactly isometric, doubly commuting
//!   representation with no window.
//!
//! * **Level-windowed.** Otherwise [`induce`] truncates at a caller-chosen
//!   total level `N`: creation out of level `N` is cut to zero, the
//!   representation carries a [`Window`](crate::reps::Window) naming the
//!   truncation, and all residual checks mask the affected levels. This is
//!   the single sanctioned source of non-exactness in the toolkit.
//!
//! The inverse direction lives in [`crate::wold::induced_certificate`]:
//! inducing `π` and certifying the result recovers a wandering
//! representation unitarily equivalent to `π`.

use crate::corr::{compute_induced_rep, corr_tensor, identity_correspondence, Correspondence};
use crate::cstar::AlgebraRep;
use crate::numlin::{eye, op_norm, TolerancePolicy};
use crate::prodsys::{mi_add, mi_leq, mi_total, mi_unit, MultiIndex, ProductSystem};
use crate::reps::{CovariantRep, Window};
use crate::{CMatrix, Error, Real, Result, ValidationReport};

/// One realized fiber `𝔼(n) ⊗_π K` of a windowed Fock space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockFiber {
    /// The grading multi-index `n`.
    pub n: MultiIndex,
    /// Offset of the fiber inside the Fock coordinates.
    pub offset: usize,
    /// Hilbert dimension of the fiber.
    pub dim: usize,
}

/// Structure of a materialized Fock space `⊕_{|n| ≤ N} 𝔼(n) ⊗_π K`.
///
/// Records the graded fibers in level-lexicographic order, whether the
/// window is exact (all pieces vanish beyond the bound), and the creation
/// operator of every orthonormal basis vector of every `E_i`.
#[derive(Debug, Clone)]
pub struct FockWindow<T: Real> {
    system: ProductSystem<T>,
    bound: usize,
    exact: bool,
    fibers: Vec<FockFiber>,
    creation: Vec<Vec<CMatrix<T>>>,
}

impl<T: Real> FockWindow<T> {
    /// The underlying product system.
    pub fn system(&self) -> &ProductSystem<T> {
        &self.system
    }

    /// The total level bound `N`.
    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Whether every `𝔼(n)` with `|n| = N + 1` vanishes, making the
    /// truncation exact.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// The realized fibers in level-lexicographic order.
    pub fn fibers(&self) -> &[FockFiber] {
        &self.fibers
    }

    /// Total dimension of the Fock representation space.
    pub fn total_dim(&self) -> usize {
        self.fibers.last().map_or(0, |f| f.offset + f.dim)
    }

    /// Position of the fiber of `n`, when realized.
    pub fn fiber_index(&self, n: &[usize]) -> Option<usize> {
        self.fibers.iter().position(|f| f.n == n)
    }

    /// Creation operator of the `x`-th orthonormal basis vector of `E_i`.
    pub fn creation(&self, i: usize, x: usize) -> &CMatrix<T> {
        &self.creation[i][x]
    }

    /// Structural invariants: contiguous fiber offsets and creation
    /// operators that shift the grading by exactly `e_i`.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new("Fock window");
        let mut off = 0;
        for f in &self.fibers {
            if f.offset != off {
                report.fail(format!("fiber {:?} offset {} misplaced from {off}", f.n, f.offset));
            }
            off += f.dim;
        }
        let k = self.system.k();
        for i in 0..k {
            for (x, c) in self.creation[i].iter().enumerate() {
                for src in &self.fibers {
                    let target = mi_add(&src.n, &mi_unit(k, i));
                    for dst in &self.fibers {
                        if dst.n == target {
                            continue;
                        }
                        let block = c.view((dst.offset, src.offset), (dst.dim, src.dim));
                        let res = op_norm(&block.clone_owned()).unwrap_or(T::infinity());
                        report.check(
                            format!(
                                "creation ({i},{x}) maps fiber {:?} only one step up",
                                src.n
                            ),
                            res,
                            T::from_f64(1e-12).unwrap(),
                        );
                    }
                }
            }
        }
        report
    }
}

/// Whether the Fock module is finite-dimensional, and where it dies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frontier {
    /// Every `𝔼(n)` vanishes eventually; the listed multi-indices are the
    /// minimal vanishing ones (an antichain whose upward closure is the
    /// whole vanishing set).
    Finite(Vec<MultiIndex>),
    /// Some graded piece survives at the probe bound
    /// `Π_i dim E_i + 1`; the Fock module is treated as
    /// infinite-dimensional. Sound but possibly incomplete: a system could
    /// die later than the probe looks.
    Infinite,
}

/// Detects whether the Fock module `F(𝔼)` is finite-dimensional.
///
/// Walks the grading level by level, computing `dim 𝔼(n + e_i)` as the
/// quotient dimension of `E_i ⊗ 𝔼(n)` and recording minimal vanishing
/// multi-indices; indices dominated by a recorded zero are skipped since
/// vanishing is inherited upward. Probing stops at total level
/// `Π_i dim E_i + 1`.
pub fn frontier<T: Real>(
    system: &ProductSystem<T>,
    pol: &TolerancePolicy<T>,
) -> Result<Frontier> {
    let k = system.k();
    let probe = (0..k)
        .map(|i| system.corr(i).dim())
        .fold(1usize, |acc, d| acc.saturating_mul(d))
        .saturating_add(1);
    let mut minimal: Vec<MultiIndex> = Vec::new();
    let mut alive: Vec<(MultiIndex, Correspondence<T>)> =
        vec![(vec![0; k], identity_correspondence::<T>(system.algebra()))];
    for _level in 1..=probe {
        let mut next: Vec<(MultiIndex, Correspondence<T>)> = Vec::new();
        for (n, corr_n) in &alive {
            for i in 0..k {
                let m = mi_add(n, &mi_unit(k, i));
                if next.iter().any(|(seen, _)| *seen == m) {
                    continue;
                }
                if minimal.iter().any(|z| mi_leq(z, &m)) {
                    continue;
                }
                let (corr_m, _) = corr_tensor(system.corr(i), corr_n, pol)?;
                if corr_m.dim() == 0 {
                    minimal.push(m);
                } else {
                    next.push((m, corr_m));
                }
            }
        }
        alive = next;
        if alive.is_empty() {
            return Ok(Frontier::Finite(minimal));
        }
    }
    Ok(Frontier::Infinite)
}

/// Builds the induced representation of `π` on `⊕_{|n| ≤ bound} 𝔼(n) ⊗_π K`.
///
/// Fibers are laid out in level-lexicographic order; zero fibers are
/// dropped. The coefficient representation is `⊕_n (φ_n ⊗ I_K)` and the
/// tilde map of direction `i` sends the fiber of `n` into the fiber of
/// `n + e_i` through the canonical merge `E_i ⊗ 𝔼(n) → 𝔼(n + e_i)`. When
/// every `𝔼(n)` with `|n| = bound + 1` dies against `π`, the result is
/// exact (no window) and exactly isometric and doubly commuting; otherwise
/// creation out of level `bound` is truncated to zero and the
/// representation carries the corresponding level window.
pub fn induce<T: Real>(
    system: &ProductSystem<T>,
    pi: &AlgebraRep<T>,
    bound: usize,
    pol: &TolerancePolicy<T>,
) -> Result<(CovariantRep<T>, FockWindow<T>)> {
    if pi.algebra() != system.algebra() {
        return Err(Error::InvalidStructure(
            "induce: coefficient representation over a different algebra".into(),
        ));
    }
    let k = system.k();
    let kappa = pi.space_dim();

    // Realized fibers with their induced structure, level by level.
    struct Fiber<T: Real> {
        n: MultiIndex,
        offset: usize,
        rep: AlgebraRep<T>,
        space: crate::corr::TensorSpace<T>,
    }
    let mut fibers: Vec<Fiber<T>> = Vec::new();
    let mut offset = 0usize;
    let mut indices: Vec<MultiIndex> = vec![vec![0; k]];
    for level in 0..=bound {
        for n in &indices {
            let piece = system.build_piece(n, pol)?;
            let (rep_n, space_n) = compute_induced_rep(piece.corr(), pi, pol)?;
            let dim = space_n.hilbert_dim();
            if dim == 0 {
                continue;
            }
            fibers.push(Fiber {
                n: n.clone(),
                offset,
                rep: rep_n,
                space: space_n,
            });
            offset += dim;
        }
        if level < bound {
            let mut next: Vec<MultiIndex> = Vec::new();
            for n in &indices {
                for i in 0..k {
                    let m = mi_add(n, &mi_unit(k, i));
                    if !next.contains(&m) {
                        next.push(m);
                    }
                }
            }
            next.sort();
            indices = next;
        }
    }
    let h = offset;

    // Exactness: no fiber survives at level bound + 1. Realized fibers are
    // downward closed, so successors of realized level-bound fibers decide.
    let mut exact = true;
    'probe: for f in &fibers {
        if mi_total(&f.n) != bound {
            continue;
        }
        for i in 0..k {
            let m = mi_add(&f.n, &mi_unit(k, i));
            let piece = system.build_piece(&m, pol)?;
            let space = crate::corr::internal_tensor(piece.corr(), pi, pol)?;
            if space.hilbert_dim() > 0 {
                exact = false;
                break 'probe;
            }
        }
    }

    // Coefficient representation: the direct sum of the fiber actions.
    let algebra = system.algebra().clone();
    let mut sigma = AlgebraRep::new(
        algebra.clone(),
        0,
        vec![CMatrix::zeros(0, 0); algebra.dim()],
    )?;
    for f in &fibers {
        sigma = sigma.direct_sum(&f.rep)?;
    }

    // Tilde maps on normalized coordinates, one merge per realized edge.
    let mut tmaps: Vec<CMatrix<T>> = (0..k)
        .map(|i| CMatrix::zeros(h, system.corr(i).dim() * h))
        .collect();
    for src in &fibers {
        let n = &src.n;
        let piece_n = system.build_piece(n, pol)?;
        let hn = src.space.hilbert_dim();
        if mi_total(n) == bound && !exact {
            continue;
        }
        for i in 0..k {
            let m = mi_add(n, &mi_unit(k, i));
            let Some(dst) = fibers.iter().find(|f| f.n == m) else {
                continue;
            };
            let di = system.corr(i).dim();
            let (_, s) = corr_tensor(system.corr(i), piece_n.corr(), pol)?;
            let merge = system.merge_iso(&mi_unit(k, i), n, pol)? * s.embed();
            let block = dst.space.embed()
                * merge.kronecker(&eye::<T>(kappa))
                * eye::<T>(di).kronecker(src.space.lift());
            for x in 0..di {
                tmaps[i]
                    .view_mut((dst.offset, x * h + src.offset), (dst.space.hilbert_dim(), hn))
                    .copy_from(&block.view((0, x * hn), (dst.space.hilbert_dim(), hn)));
            }
        }
    }

    let window = if exact {
        None
    } else {
        let mut levels = vec![0usize; h];
        for f in &fibers {
            for b in f.offset..f.offset + f.space.hilbert_dim() {
                levels[b] = mi_total(&f.n);
            }
        }
        Some(Window::from_levels(&levels, bound))
    };

    let creation: Vec<Vec<CMatrix<T>>> = (0..k)
        .map(|i| {
            let di = system.corr(i).dim();
            (0..di)
                .map(|x| tmaps[i].view((0, x * h), (h, h)).clone_owned())
                .collect()
        })
        .collect();
    let meta = FockWindow {
        system: system.clone(),
        bound,
        exact,
        fibers: fibers
            .iter()
            .map(|f| FockFiber {
                n: f.n.clone(),
                offset: f.offset,
                dim: f.space.hilbert_dim(),
            })
            .collect(),
        creation,
    };
    let rep = CovariantRep::from_normalized(system.clone(), sigma, tmaps, window, pol)?;
    Ok((rep, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cstar::{multiplicity_vector, rep_from_multiplicities, FinCStarAlgebra, MultiplicityVector};
    use crate::numlin::re;
    use crate::wold::{induced_certificate, p_infty};
    use crate::C;
    use proptest::prelude::*;

    type M = CMatrix<f64>;

    const TOL: f64 = 1e-8;

    fn pol() -> TolerancePolicy<f64> {
        TolerancePolicy::default()
    }

    fn phase(theta: f64) -> C<f64> {
        C::new(theta.cos(), theta.sin())
    }

    fn scalar_algebra() -> FinCStarAlgebra {
        FinCStarAlgebra::new(vec![1]).unwrap()
    }

    fn scalar_line() -> Correspondence<f64> {
        let a = scalar_algebra();
        Correspondence::new(a.clone(), 1, vec![eye(1)], vec![eye(1)], vec![a.one()]).unwrap()
    }

    fn scalar_system(k: usize, lambda: C<f64>) -> ProductSystem<f64> {
        let corrs = (0..k).map(|_| scalar_line()).collect();
        let mut flips = Vec::new();
        for i in 0..k {
            for j in 0..i {
                flips.push(((i, j), M::from_element(1, 1, lambda)));
            }
        }
        ProductSystem::new(corrs, flips, &pol()).unwrap()
    }

    fn scalar_pi(dim: usize) -> AlgebraRep<f64> {
        AlgebraRep::new(scalar_algebra(), dim, vec![eye(dim)]).unwrap()
    }

    /// Graph correspondence over `ℂ²` with a single edge from vertex 0 to
    /// vertex 1: one-dimensional, `E ⊗ E = 0`.
    fn one_edge_system() -> (FinCStarAlgebra, ProductSystem<f64>) {
        let a = FinCStarAlgebra::new(vec![1, 1]).unwrap();
        let right = vec![M::zeros(1, 1), M::from_element(1, 1, re(1.0))];
        let left = vec![M::from_element(1, 1, re(1.0)), M::zeros(1, 1)];
        let inner = vec![a.unit::<f64>(1, 0, 0)];
        let e = Correspondence::new(a.clone(), 1, right, left, inner).unwrap();
        let system = ProductSystem::new(vec![e], Vec::new(), &pol()).unwrap();
        (a, system)
    }

    fn zero_correspondence_system() -> ProductSystem<f64> {
        let a = scalar_algebra();
        let e = Correspondence::new(a, 0, vec![M::zeros(0, 0)], vec![M::zeros(0, 0)], vec![])
            .unwrap();
        ProductSystem::new(vec![e], Vec::new(), &pol()).unwrap()
    }

    #[test]
    fn scalar_induction_is_the_truncated_shift() {
        let system = scalar_system(1, re(1.0));
        let (rep, meta) = induce(&system, &scalar_pi(1), 5, &pol()).unwrap();
        assert_eq!(rep.dim_h(), 6);
        assert!(!meta.is_exact());
        assert_eq!(meta.bound(), 5);
        let expected = M::from_fn(6, 6, |r, c| {
            if r == c + 1 {
                re(1.0)
            } else {
                C::new(0.0, 0.0)
            }
        });
        assert!(op_norm(&(rep.tmap_alg(0) - expected)).unwrap() <= 1e-12);
        assert!(rep.window().is_some());
        let class = rep.classify(TOL).unwrap();
        assert!(class.is_isometric);
        assert!(meta.validate().passed());
    }

    #[test]
    fn one_edge_fock_is_exact_finite() {
        let (a, system) = one_edge_system();
        let pi = a.defining_rep::<f64>();
        let (rep, meta) = induce(&system, &pi, 3, &pol()).unwrap();
        assert!(meta.is_exact());
        assert!(rep.window().is_none());
        assert_eq!(rep.dim_h(), 3);
        assert_eq!(
            meta.fibers(),
            &[
                FockFiber {
                    n: vec![0],
                    offset: 0,
                    dim: 2
                },
                FockFiber {
                    n: vec![1],
                    offset: 2,
                    dim: 1
                },
            ]
        );
        let class = rep.classify(TOL).unwrap();
        assert!(class.is_isometric);
        assert!(meta.validate().passed());

        let cert = induced_certificate(&rep, TOL, &pol()).unwrap();
        assert_eq!(cert.realized, vec![(vec![0], 2), (vec![1], 1)]);
        assert!(cert.unitary_residual <= 1e-10);
        assert!(cert.intertwining_residual <= 1e-10);
        assert_eq!(
            cert.multiplicity.as_finite().unwrap(),
            multiplicity_vector(&pi, &pol()).unwrap().as_finite().unwrap()
        );
    }

    #[test]
    fn twisted_scalar_pair_matches_the_hand_formula() {
        let lambda = phase(0.7);
        let bound = 4;
        let system = scalar_system(2, lambda);
        let (rep, meta) = induce(&system, &scalar_pi(1), bound, &pol()).unwrap();
        let dim = rep.dim_h();
        let idx = |n: &[usize]| meta.fiber_index(n).unwrap();
        let mut s1 = M::zeros(dim, dim);
        let mut s2 = M::zeros(dim, dim);
        for f in meta.fibers() {
            let n = &f.n;
            if n[0] + n[1] >= bound {
                continue;
            }
            s1[(idx(&[n[0] + 1, n[1]]), idx(n))] = re(1.0);
            s2[(idx(&[n[0], n[1] + 1]), idx(n))] = lambda.powu(n[0] as u32);
        }
        assert!(op_norm(&(rep.tmap_alg(0) - &s1)).unwrap() <= 1e-12);
        assert!(op_norm(&(rep.tmap_alg(1) - &s2)).unwrap() <= 1e-12);
        let class = rep.classify(TOL).unwrap();
        assert!(class.is_isometric);
        assert!(class.is_doubly_commuting);
    }

    #[test]
    fn frontier_detects_nilpotent_and_free_systems() {
        let (_, graph) = one_edge_system();
        assert_eq!(
            frontier(&graph, &pol()).unwrap(),
            Frontier::Finite(vec![vec![2]])
        );
        assert_eq!(
            frontier(&scalar_system(1, re(1.0)), &pol()).unwrap(),
            Frontier::Infinite
        );
        assert_eq!(
            frontier(&zero_correspondence_system(), &pol()).unwrap(),
            Frontier::Finite(vec![vec![1]])
        );
        assert_eq!(
            frontier(&scalar_system(2, phase(1.1)), &pol()).unwrap(),
            Frontier::Infinite
        );
    }

    #[test]
    fn induction_round_trips_through_the_certificate() {
        // Multiplicity-weighted coefficient representation over C^2.
        let (a, system) = one_edge_system();
        let pi = rep_from_multiplicities::<f64>(
            &a,
            &MultiplicityVector::from_finite(&[2, 1]),
        )
        .unwrap();
        let (rep, meta) = induce(&system, &pi, 4, &pol()).unwrap();
        assert!(meta.is_exact());
        // Fiber 0 carries pi, fiber e_1 carries dim E ⊗ K = rank pi(q_1).
        assert_eq!(meta.fibers()[0].dim, 3);
        assert_eq!(meta.fibers()[1].dim, 1);
        let cert = induced_certificate(&rep, TOL, &pol()).unwrap();
        assert_eq!(cert.multiplicity.as_finite().unwrap(), vec![2, 1]);
        assert!(cert.unitary_residual <= 1e-9);
        assert!(cert.intertwining_residual <= 1e-9);

        // Windowed round trip with a two-dimensional coefficient space.
        let sys1 = scalar_system(1, re(1.0));
        let (rep, _) = induce(&sys1, &scalar_pi(2), 3, &pol()).unwrap();
        assert_eq!(rep.dim_h(), 8);
        let cert = induced_certificate(&rep, TOL, &pol()).unwrap();
        assert_eq!(cert.multiplicity.as_finite().unwrap(), vec![2]);
        assert_eq!(cert.realized.len(), 4);
        assert!(cert.realized.iter().all(|(_, d)| *d == 2));
    }

    #[test]
    fn induced_representations_are_pure() {
        let system = scalar_system(2, phase(0.4));
        let (rep, _) = induce(&system, &scalar_pi(1), 3, &pol()).unwrap();
        let (joint, gap) = p_infty(&rep, &pol()).unwrap();
        assert_eq!(joint.rank(), 0);
        assert!(gap <= 1e-10);
    }

    #[test]
    fn zero_coefficient_space_induces_the_empty_representation() {
        let system = scalar_system(1, re(1.0));
        let (rep, meta) = induce(&system, &scalar_pi(0), 3, &pol()).unwrap();
        assert_eq!(rep.dim_h(), 0);
        assert!(meta.is_exact());
        assert!(meta.fibers().is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        /// Inducing and certifying recovers the coefficient representation
        /// for every twist and small multiplicity.
        #[test]
        fn round_trip_recovers_the_multiplicity(theta in 0.0f64..6.28, kappa in 1usize..3) {
            let system = scalar_system(2, phase(theta));
            let (rep, _) = induce(&system, &scalar_pi(kappa), 3, &pol()).unwrap();
            let cert = induced_certificate(&rep, TOL, &pol()).unwrap();
            prop_assert!(cert.unitary_residual <= 1e-8);
            prop_assert!(cert.intertwining_residual <= 1e-8);
            prop_assert_eq!(cert.multiplicity.as_finite().unwrap(), vec![kappa as u64]);
        }
    }
}
