//! Finite-dimensional C*-algebras `A = ⊕_b M_{n_b}(ℂ)` and their
//! representations.
//!
//! An algebra is described by its block dimensions alone; elements carry one
//! dense block per summand, and representations are stored through the
//! images of the matrix units `e^{(b)}_{pq}`, which turns validation into a
//! finite list of residuals. Finite-dimensional representations are
//! classified up to unitary equivalence by their multiplicity vector
//! `m_b = rank σ(e^{(b)}_{11})`; the canonical model for a multiplicity
//! vector and the explicit intertwiners onto it are what the unitary
//! extension calculus consumes.
//!
//! The canonical faithful trace `τ = Σ_b (1/n_b) Tr_b` is fixed here once;
//! correspondences use it to scalarize A-valued Grams.

use crate::numlin::{eye, finite_check, op_norm, range_projection, TolerancePolicy};
use crate::{diag, CMatrix, Error, Real, Result, ValidationReport, C};
use num_traits::{Float, Zero};
use std::fmt;

/// A finite-dimensional C*-algebra `⊕_b M_{n_b}(ℂ)`, described by its block
/// dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FinCStarAlgebra {
    block_dims: Vec<usize>,
}

impl FinCStarAlgebra {
    /// Builds the algebra from its block dimensions (all positive, at least
    /// one block).
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidStructure(
                "algebra needs at least one block".into(),
            ));
        }
        if block_dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidStructure(
                "algebra block dimensions must be positive".into(),
            ));
        }
        Ok(FinCStarAlgebra { block_dims })
    }

    /// Number of blocks `s`.
    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Block dimensions `n_1..n_s`.
    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Linear dimension `Σ_b n_b²`.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    /// Dimension `Σ_b n_b` of the defining representation.
    pub fn defining_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    /// Iterates over all matrix-unit indices `(b, p, q)` in canonical order:
    /// block major, then row, then column.
    pub fn unit_indices(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.block_dims
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| (0..n).flat_map(move |p| (0..n).map(move |q| (b, p, q))))
    }

    /// Flat position of the matrix unit `(b, p, q)` in canonical order.
    pub fn unit_position(&self, b: usize, p: usize, q: usize) -> usize {
        let offset: usize = self.block_dims[..b].iter().map(|n| n * n).sum();
        offset + p * self.block_dims[b] + q
    }

    /// Zero element.
    pub fn zero<T: Real>(&self) -> AlgebraElement<T> {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.block_dims.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        }
    }

    /// Multiplicative unit.
    pub fn one<T: Real>(&self) -> AlgebraElement<T> {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.block_dims.iter().map(|&n| eye(n)).collect(),
        }
    }

    /// Matrix unit `e^{(b)}_{pq}` as an element.
    pub fn unit<T: Real>(&self, b: usize, p: usize, q: usize) -> AlgebraElement<T> {
        let mut el = self.zero();
        el.blocks[b][(p, q)] = C::new(T::one(), T::zero());
        el
    }

    /// Central projection `z_b` (identity of block `b`).
    pub fn central_projection<T: Real>(&self, b: usize) -> AlgebraElement<T> {
        let mut el = self.zero();
        el.blocks[b] = eye(self.block_dims[b]);
        el
    }

    /// The canonical faithful trace `τ(a) = Σ_b Tr(a_b)/n_b`.
    pub fn trace<T: Real>(&self, a: &AlgebraElement<T>) -> C<T> {
        let mut acc = C::zero();
        for (b, &n) in self.block_dims.iter().enumerate() {
            let tr: C<T> = a.blocks[b].diagonal().iter().copied().sum();
            acc += tr.unscale(T::from_usize(n).unwrap());
        }
        acc
    }

    /// The defining (identity) representation on `ℂ^{Σ n_b}`.
    pub fn defining_rep<T: Real>(&self) -> AlgebraRep<T> {
        let dim = self.defining_dim();
        let mut images = Vec::with_capacity(self.dim());
        for (b, p, q) in self.unit_indices() {
            let offset: usize = self.block_dims[..b].iter().sum();
            let mut m = CMatrix::zeros(dim, dim);
            m[(offset + p, offset + q)] = C::new(T::one(), T::zero());
            images.push(m);
        }
        AlgebraRep {
            algebra: self.clone(),
            space_dim: dim,
            unit_images: images,
        }
    }

    /// Orthonormal element basis for the trace inner product
    /// `⟨a, b⟩ = τ(a*b)`: matrix units scaled by `√n_b`, canonical order.
    pub fn orthonormal_basis<T: Real>(&self) -> Vec<AlgebraElement<T>> {
        self.unit_indices()
            .map(|(b, p, q)| {
                let mut el = self.zero();
                let s = Float::sqrt(T::from_usize(self.block_dims[b]).unwrap());
                el.blocks[b][(p, q)] = C::new(s, T::zero());
                el
            })
            .collect()
    }
}

/// An element of a [`FinCStarAlgebra`]: one dense matrix per block.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement<T: Real> {
    algebra: FinCStarAlgebra,
    blocks: Vec<CMatrix<T>>,
}

impl<T: Real> AlgebraElement<T> {
    /// Builds an element from its blocks, checking shapes.
    pub fn new(algebra: FinCStarAlgebra, blocks: Vec<CMatrix<T>>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::DimensionMismatch {
                context: "AlgebraElement".into(),
                expected: format!("{} blocks", algebra.num_blocks()),
                found: format!("{}", blocks.len()),
            });
        }
        for (b, m) in blocks.iter().enumerate() {
            let n = algebra.block_dims()[b];
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("AlgebraElement block {b}"),
                    expected: format!("{n}x{n}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            finite_check(m, "AlgebraElement")?;
        }
        Ok(AlgebraElement { algebra, blocks })
    }

    /// The algebra this element belongs to.
    pub fn algebra(&self) -> &FinCStarAlgebra {
        &self.algebra
    }

    /// The blocks of the element.
    pub fn blocks(&self) -> &[CMatrix<T>] {
        &self.blocks
    }

    /// Entry at matrix-unit position `(b, p, q)`; these are the coordinates
    /// of the element in the matrix-unit basis.
    pub fn coeff(&self, b: usize, p: usize, q: usize) -> C<T> {
        self.blocks[b][(p, q)]
    }

    /// Adjoint `a*`.
    pub fn adjoint(&self) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.adjoint()).collect(),
        }
    }

    /// Product `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&rhs.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Sum `self + rhs`.
    pub fn add(&self, rhs: &Self) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&rhs.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Scalar multiple `λ · self`.
    pub fn scale(&self, lambda: C<T>) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.map(|z| z * lambda)).collect(),
        }
    }

    /// Largest block operator norm.
    pub fn norm(&self) -> Result<T> {
        let mut best = T::zero();
        for m in &self.blocks {
            best = Float::max(best, op_norm(m)?);
        }
        Ok(best)
    }
}

/// A unital representation of a [`FinCStarAlgebra`] on `ℂ^d`, stored through
/// the images of the matrix units.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraRep<T: Real> {
    algebra: FinCStarAlgebra,
    space_dim: usize,
    unit_images: Vec<CMatrix<T>>,
}

impl<T: Real> AlgebraRep<T> {
    /// Builds a representation from matrix-unit images in canonical order,
    /// checking shapes only; use [`AlgebraRep::validate`] for the relations.
    pub fn new(
        algebra: FinCStarAlgebra,
        space_dim: usize,
        unit_images: Vec<CMatrix<T>>,
    ) -> Result<Self> {
        if unit_images.len() != algebra.dim() {
            return Err(Error::DimensionMismatch {
                context: "AlgebraRep".into(),
                expected: format!("{} unit images", algebra.dim()),
                found: format!("{}", unit_images.len()),
            });
        }
        for m in &unit_images {
            if m.nrows() != space_dim || m.ncols() != space_dim {
                return Err(Error::DimensionMismatch {
                    context: "AlgebraRep unit image".into(),
                    expected: format!("{space_dim}x{space_dim}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            finite_check(m, "AlgebraRep")?;
        }
        Ok(AlgebraRep {
            algebra,
            space_dim,
            unit_images,
        })
    }

    /// The represented algebra.
    pub fn algebra(&self) -> &FinCStarAlgebra {
        &self.algebra
    }

    /// Dimension of the representation space.
    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    /// Image of the matrix unit `e^{(b)}_{pq}`.
    pub fn unit_image(&self, b: usize, p: usize, q: usize) -> &CMatrix<T> {
        &self.unit_images[self.algebra.unit_position(b, p, q)]
    }

    /// Image of the central projection `z_b`.
    pub fn central_image(&self, b: usize) -> CMatrix<T> {
        let n = self.algebra.block_dims()[b];
        let mut acc = CMatrix::zeros(self.space_dim, self.space_dim);
        for p in 0..n {
            acc += self.unit_image(b, p, p);
        }
        acc
    }

    /// Image `σ(a)` of an arbitrary element, by linearity over the unit
    /// basis.
    pub fn apply(&self, a: &AlgebraElement<T>) -> CMatrix<T> {
        let mut acc = CMatrix::zeros(self.space_dim, self.space_dim);
        for (b, p, q) in self.algebra.unit_indices() {
            let coeff = a.coeff(b, p, q);
            if coeff != C::zero() {
                acc += self.unit_image(b, p, q).map(|z| z * coeff);
            }
        }
        acc
    }

    /// Direct sum with another representation of the same algebra.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.algebra != other.algebra {
            return Err(Error::InvalidStructure(
                "direct sum of representations of different algebras".into(),
            ));
        }
        let dim = self.space_dim + other.space_dim;
        let images = self
            .unit_images
            .iter()
            .zip(&other.unit_images)
            .map(|(a, b)| {
                let mut m = CMatrix::zeros(dim, dim);
                m.view_mut((0, 0), (self.space_dim, self.space_dim)).copy_from(a);
                m.view_mut(
                    (self.space_dim, self.space_dim),
                    (other.space_dim, other.space_dim),
                )
                .copy_from(b);
                m
            })
            .collect();
        AlgebraRep::new(self.algebra.clone(), dim, images)
    }

    /// Conjugated representation `a ↦ U σ(a) U*`.
    pub fn conjugate(&self, u: &CMatrix<T>) -> Result<Self> {
        if u.ncols() != self.space_dim {
            return Err(Error::DimensionMismatch {
                context: "AlgebraRep::conjugate".into(),
                expected: format!("{} columns", self.space_dim),
                found: format!("{}", u.ncols()),
            });
        }
        let images = self
            .unit_images
            .iter()
            .map(|m| u * m * u.adjoint())
            .collect();
        AlgebraRep::new(self.algebra.clone(), u.nrows(), images)
    }

    /// Compression `a ↦ B* σ(a) B` to the span of the orthonormal columns of
    /// `B`. The compression is a representation exactly when that span is
    /// invariant.
    pub fn compress(&self, basis: &CMatrix<T>) -> Result<Self> {
        if basis.nrows() != self.space_dim {
            return Err(Error::DimensionMismatch {
                context: "AlgebraRep::compress".into(),
                expected: format!("{} rows", self.space_dim),
                found: format!("{}", basis.nrows()),
            });
        }
        let images = self
            .unit_images
            .iter()
            .map(|m| basis.adjoint() * m * basis)
            .collect();
        AlgebraRep::new(self.algebra.clone(), basis.ncols(), images)
    }

    /// Checks the *-homomorphism relations, adjoints and unitality.
    ///
    /// Within each block all products of matrix units are compared against
    /// `e_{pq} e_{rs} = δ_{qr} e_{ps}`; across blocks the images must be
    /// annihilated by the other blocks' central images (which, together with
    /// the in-block relations, forces all cross products to vanish).
    pub fn validate(&self, tol: T) -> ValidationReport {
        let mut report = ValidationReport::new("algebra representation");
        let a = &self.algebra;
        for (b, &n) in a.block_dims().iter().enumerate() {
            for p in 0..n {
                for q in 0..n {
                    let epq = self.unit_image(b, p, q);
                    // Adjoint relation.
                    let res = op_norm(&(epq.adjoint() - self.unit_image(b, q, p)))
                        .unwrap_or(T::infinity());
                    report.check(format!("adjoint e[{b}]({p},{q})"), res, tol);
                    // Multiplication within the block.
                    for r in 0..n {
                        for s in 0..n {
                            let mut prod = epq * self.unit_image(b, r, s);
                            if q == r {
                                prod -= self.unit_image(b, p, s);
                            }
                            let res = op_norm(&prod).unwrap_or(T::infinity());
                            report.check(
                                format!("product e[{b}]({p},{q})·e[{b}]({r},{s})"),
                                res,
                                tol,
                            );
                        }
                    }
                }
            }
        }
        // Cross-block annihilation via central projections.
        let centrals: Vec<CMatrix<T>> =
            (0..a.num_blocks()).map(|b| self.central_image(b)).collect();
        for (b, &n) in a.block_dims().iter().enumerate() {
            for b2 in 0..a.num_blocks() {
                if b2 == b {
                    continue;
                }
                for p in 0..n {
                    for q in 0..n {
                        let res = op_norm(&(self.unit_image(b, p, q) * &centrals[b2]))
                            .unwrap_or(T::infinity());
                        report.check(format!("cross e[{b}]({p},{q})·z[{b2}]"), res, tol);
                    }
                }
            }
        }
        // Unitality.
        let mut unit = CMatrix::zeros(self.space_dim, self.space_dim);
        for z in &centrals {
            unit += z;
        }
        let res = op_norm(&(unit - eye::<T>(self.space_dim))).unwrap_or(T::infinity());
        report.check("unital Σ z_b = I", res, tol);
        report
    }
}

/// An entry of a multiplicity vector: a natural number or `∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtNat {
    /// A finite multiplicity.
    Fin(u64),
    /// Infinite multiplicity.
    Inf,
}

impl ExtNat {
    /// Extended addition: `∞` absorbs.
    pub fn add(self, rhs: ExtNat) -> ExtNat {
        match (self, rhs) {
            (ExtNat::Fin(a), ExtNat::Fin(b)) => ExtNat::Fin(a + b),
            _ => ExtNat::Inf,
        }
    }

    /// Extended multiplication by a natural: `0·∞ = 0`, `c·∞ = ∞` for `c > 0`.
    pub fn mul_nat(self, c: u64) -> ExtNat {
        match self {
            ExtNat::Fin(a) => ExtNat::Fin(a * c),
            ExtNat::Inf => {
                if c == 0 {
                    ExtNat::Fin(0)
                } else {
                    ExtNat::Inf
                }
            }
        }
    }

    /// Extended order: `∞` dominates everything.
    pub fn leq(self, rhs: ExtNat) -> bool {
        match (self, rhs) {
            (_, ExtNat::Inf) => true,
            (ExtNat::Inf, ExtNat::Fin(_)) => false,
            (ExtNat::Fin(a), ExtNat::Fin(b)) => a <= b,
        }
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<u64> {
        match self {
            ExtNat::Fin(a) => Some(a),
            ExtNat::Inf => None,
        }
    }
}

impl fmt::Display for ExtNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNat::Fin(a) => write!(f, "{a}"),
            ExtNat::Inf => write!(f, "inf"),
        }
    }
}

/// Multiplicities of the irreducibles `π_1..π_s` inside a representation;
/// entries live in `ℕ ∪ {∞}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiplicityVector {
    entries: Vec<ExtNat>,
}

impl MultiplicityVector {
    /// Builds a multiplicity vector from extended naturals.
    pub fn new(entries: Vec<ExtNat>) -> Self {
        MultiplicityVector { entries }
    }

    /// Builds a finite multiplicity vector.
    pub fn from_finite(entries: &[u64]) -> Self {
        MultiplicityVector {
            entries: entries.iter().map(|&e| ExtNat::Fin(e)).collect(),
        }
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when there are no entries.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The entries.
    pub fn entries(&self) -> &[ExtNat] {
        &self.entries
    }

    /// All entries as finite values, if none is `∞`.
    pub fn as_finite(&self) -> Option<Vec<u64>> {
        self.entries.iter().map(|e| e.finite()).collect()
    }

    /// Entrywise extended order.
    pub fn leq(&self, rhs: &Self) -> bool {
        self.len() == rhs.len()
            && self
                .entries
                .iter()
                .zip(rhs.entries())
                .all(|(a, b)| a.leq(*b))
    }
}

impl fmt::Display for MultiplicityVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Reads the multiplicity vector `m_b = rank σ(e^{(b)}_{11})` off a valid
/// representation, with rank consistency checks across the diagonal units
/// of each block and against the total dimension.
pub fn multiplicity_vector<T: Real>(
    sigma: &AlgebraRep<T>,
    pol: &TolerancePolicy<T>,
) -> Result<MultiplicityVector> {
    let a = sigma.algebra();
    let mut entries = Vec::with_capacity(a.num_blocks());
    let mut total = 0usize;
    for (b, &n) in a.block_dims().iter().enumerate() {
        let mut block_rank = None;
        for p in 0..n {
            let r = crate::numlin::rank(sigma.unit_image(b, p, p), pol)?;
            match block_rank {
                None => block_rank = Some(r),
                Some(r0) if r0 != r => {
                    return Err(Error::RankInconsistency {
                        context: "multiplicity_vector".into(),
                        detail: format!(
                            "block {b}: rank σ(e_{{{p}{p}}}) = {r} differs from rank σ(e_{{00}}) = {r0}"
                        ),
                    });
                }
                _ => {}
            }
        }
        let m = block_rank.unwrap_or(0);
        total += m * n;
        entries.push(ExtNat::Fin(m as u64));
    }
    if total != sigma.space_dim() {
        return Err(Error::RankInconsistency {
            context: "multiplicity_vector".into(),
            detail: format!(
                "Σ m_b·n_b = {total} does not match space dimension {}",
                sigma.space_dim()
            ),
        });
    }
    Ok(MultiplicityVector::new(entries))
}

/// Canonical representation with the given finite multiplicities: block
/// index major, copy index minor, each copy carrying the defining action of
/// its block.
pub fn rep_from_multiplicities<T: Real>(
    algebra: &FinCStarAlgebra,
    m: &MultiplicityVector,
) -> Result<AlgebraRep<T>> {
    if m.len() != algebra.num_blocks() {
        return Err(Error::DimensionMismatch {
            context: "rep_from_multiplicities".into(),
            expected: format!("{} entries", algebra.num_blocks()),
            found: format!("{}", m.len()),
        });
    }
    let mult = m.as_finite().ok_or_else(|| {
        Error::InvalidStructure("rep_from_multiplicities requires finite multiplicities".into())
    })?;
    let dims = algebra.block_dims();
    let dim: usize = mult
        .iter()
        .zip(dims)
        .map(|(&m_b, &n_b)| m_b as usize * n_b)
        .sum();
    let mut images = Vec::with_capacity(algebra.dim());
    for (b, p, q) in algebra.unit_indices() {
        let offset: usize = mult[..b]
            .iter()
            .zip(&dims[..b])
            .map(|(&m_c, &n_c)| m_c as usize * n_c)
            .sum();
        let n = dims[b];
        let mut img = CMatrix::zeros(dim, dim);
        for c in 0..mult[b] as usize {
            img[(offset + c * n + p, offset + c * n + q)] = C::new(T::one(), T::zero());
        }
        images.push(img);
    }
    AlgebraRep::new(algebra.clone(), dim, images)
}

/// Unitary `U : H → H_canon` intertwining a valid representation with the
/// canonical model of its multiplicity vector: `U σ(a) = σ_canon(a) U`.
///
/// For each block, an orthonormal basis `v_1..v_m` of `ran σ(e^{(b)}_{11})`
/// seeds the copies; the vectors `σ(e^{(b)}_{p1}) v_c` then fill out an
/// orthonormal basis of the isotypic component in a deterministic order.
pub fn canonical_intertwiner<T: Real>(
    sigma: &AlgebraRep<T>,
    pol: &TolerancePolicy<T>,
) -> Result<(CMatrix<T>, MultiplicityVector)> {
    let m = multiplicity_vector(sigma, pol)?;
    let mult = m.as_finite().expect("multiplicity_vector is finite");
    let a = sigma.algebra();
    let d = sigma.space_dim();
    let mut u = CMatrix::zeros(d, d);
    let mut row = 0usize;
    for (b, &n) in a.block_dims().iter().enumerate() {
        let seed_proj = range_projection(sigma.unit_image(b, 0, 0), pol)?;
        let seeds = seed_proj.basis()?;
        debug_assert_eq!(seeds.ncols(), mult[b] as usize);
        for c in 0..mult[b] as usize {
            let v = seeds.column(c).clone_owned();
            for p in 0..n {
                let w = sigma.unit_image(b, p, 0) * &v;
                // U maps w to the canonical basis vector (b, c, p), so the
                // corresponding row of U is w*.
                u.row_mut(row).copy_from(&w.adjoint());
                row += 1;
            }
        }
    }
    let unit_res = op_norm(&(&u * u.adjoint() - eye::<T>(d)))?;
    let slack = T::from_f64(100.0).unwrap();
    if unit_res > pol.abs_tol * slack {
        return Err(Error::FailedChecks {
            context: "canonical_intertwiner".into(),
            failures: vec![format!(
                "constructed intertwiner is not unitary (residual {:.3e})",
                diag(unit_res)
            )],
        });
    }
    Ok((u, m))
}

/// Unitary `W : H_σ → H_ρ` with `W σ(a) = ρ(a) W`, built by composing the
/// canonical intertwiners of both sides. Errors when the multiplicity
/// vectors differ.
pub fn intertwiner<T: Real>(
    sigma: &AlgebraRep<T>,
    rho: &AlgebraRep<T>,
    pol: &TolerancePolicy<T>,
) -> Result<CMatrix<T>> {
    if sigma.algebra() != rho.algebra() {
        return Err(Error::InvalidStructure(
            "intertwiner between representations of different algebras".into(),
        ));
    }
    let (us, ms) = canonical_intertwiner(sigma, pol)?;
    let (ur, mr) = canonical_intertwiner(rho, pol)?;
    if ms != mr {
        return Err(Error::RankInconsistency {
            context: "intertwiner".into(),
            detail: format!("multiplicity vectors differ: {ms} vs {mr}"),
        });
    }
    Ok(ur.adjoint() * us)
}
