//! C*-correspondences over a finite-dimensional algebra and their tensor
//! products.
//!
//! A correspondence is presented on a finite generating basis `ε_1..ε_d`:
//! the right action and the left action `φ` as matrix-unit images acting on
//! basis coordinates, and the A-valued inner products `⟨ε_p, ε_q⟩` (linear
//! in the second variable). Tensor constructions produce semi-inner product
//! spaces whose A-valued null space has to be quotiented out; the canonical
//! faithful trace `τ` scalarizes those Grams (`τ(⟨x,x⟩) = 0 ⇔ ⟨x,x⟩ = 0`),
//! reducing every quotient to one Hermitian eigenproblem.
//!
//! A quotient is carried around as a [`TensorSpace`]: an `embed` matrix
//! mapping algebraic tensor coordinates isometrically onto an orthonormal
//! coordinate system of the quotient, and a `lift` section with
//! `embed·lift = I` whose composite `lift·embed` is the orthogonal
//! projection onto the complement of the Gram null space. Operators given on
//! algebraic coordinates are pushed through `embed`/`lift`, which keeps all
//! downstream interfaces free of basis ambiguity.

use crate::cstar::{AlgebraElement, AlgebraRep, FinCStarAlgebra};
use crate::numlin::{eye, finite_check, hermitian_eigen, op_norm, TolerancePolicy};
use crate::{diag, CMatrix, Error, Real, Result, ValidationReport, C};
use num_traits::{Float, Zero};

/// A finite-dimensional C*-correspondence over `A`, presented on a
/// generating basis of `dim` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence<T: Real> {
    algebra: FinCStarAlgebra,
    dim: usize,
    /// Right action of each matrix unit on basis coordinates:
    /// `coords(ξ·u) = right[u] · coords(ξ)`.
    right: Vec<CMatrix<T>>,
    /// Left action `φ(u)` of each matrix unit on basis coordinates.
    left: Vec<CMatrix<T>>,
    /// `⟨ε_p, ε_q⟩ ∈ A`, stored flat at `p·dim + q`.
    inner: Vec<AlgebraElement<T>>,
}

impl<T: Real> Correspondence<T> {
    /// Builds a correspondence from its structure matrices, checking shapes.
    pub fn new(
        algebra: FinCStarAlgebra,
        dim: usize,
        right: Vec<CMatrix<T>>,
        left: Vec<CMatrix<T>>,
        inner: Vec<AlgebraElement<T>>,
    ) -> Result<Self> {
        let units = algebra.dim();
        if right.len() != units || left.len() != units {
            return Err(Error::DimensionMismatch {
                context: "Correspondence actions".into(),
                expected: format!("{units} unit images"),
                found: format!("right {} / left {}", right.len(), left.len()),
            });
        }
        for m in right.iter().chain(left.iter()) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    context: "Correspondence action".into(),
                    expected: format!("{dim}x{dim}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            finite_check(m, "Correspondence action")?;
        }
        if inner.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "Correspondence inner products".into(),
                expected: format!("{}", dim * dim),
                found: format!("{}", inner.len()),
            });
        }
        for el in &inner {
            if el.algebra() != &algebra {
                return Err(Error::InvalidStructure(
                    "inner product entry over a different algebra".into(),
                ));
            }
        }
        Ok(Correspondence {
            algebra,
            dim,
            right,
            left,
            inner,
        })
    }

    /// The base algebra.
    pub fn algebra(&self) -> &FinCStarAlgebra {
        &self.algebra
    }

    /// Number of basis elements (zero is allowed: the zero correspondence).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Right action of the matrix unit `(b, p, q)`.
    pub fn right_unit(&self, b: usize, p: usize, q: usize) -> &CMatrix<T> {
        &self.right[self.algebra.unit_position(b, p, q)]
    }

    /// Left action of the matrix unit `(b, p, q)`.
    pub fn left_unit(&self, b: usize, p: usize, q: usize) -> &CMatrix<T> {
        &self.left[self.algebra.unit_position(b, p, q)]
    }

    /// Right action of an arbitrary element, by linearity.
    pub fn right_of(&self, a: &AlgebraElement<T>) -> CMatrix<T> {
        self.combine(&self.right, a)
    }

    /// Left action `φ(a)` of an arbitrary element, by linearity.
    pub fn left_of(&self, a: &AlgebraElement<T>) -> CMatrix<T> {
        self.combine(&self.left, a)
    }

    fn combine(&self, images: &[CMatrix<T>], a: &AlgebraElement<T>) -> CMatrix<T> {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for (b, p, q) in self.algebra.unit_indices() {
            let coeff = a.coeff(b, p, q);
            if coeff != C::zero() {
                acc += images[self.algebra.unit_position(b, p, q)].map(|z| z * coeff);
            }
        }
        acc
    }

    /// `⟨ε_p, ε_q⟩ ∈ A`.
    pub fn inner(&self, p: usize, q: usize) -> &AlgebraElement<T> {
        &self.inner[p * self.dim + q]
    }

    /// The τ-scalarized Gram `G_{pq} = τ(⟨ε_p, ε_q⟩)`.
    pub fn scalar_gram(&self) -> CMatrix<T> {
        CMatrix::from_fn(self.dim, self.dim, |p, q| {
            self.algebra.trace(self.inner(p, q))
        })
    }

    /// Checks all correspondence axioms on the basis within `tol`.
    pub fn validate(&self, tol: T) -> ValidationReport {
        let mut report = ValidationReport::new("correspondence");
        let a = &self.algebra;
        let d = self.dim;

        // Right action: unital antirepresentation.
        let res = op_norm(&(self.right_of(&a.one()) - eye::<T>(d))).unwrap_or(T::infinity());
        report.check("right action unital", res, tol);
        for x @ (b1, p1, q1) in a.unit_indices() {
            for y @ (b2, p2, q2) in a.unit_indices() {
                // R(x)·R(y) = R(y·x).
                let yx = a.unit::<T>(b2, p2, q2).mul(&a.unit(b1, p1, q1));
                let lhs = &self.right[a.unit_position(x.0, x.1, x.2)]
                    * &self.right[a.unit_position(y.0, y.1, y.2)];
                let res = op_norm(&(lhs - self.right_of(&yx))).unwrap_or(T::infinity());
                report.check(
                    format!("right antirep e[{b1}]({p1},{q1})∘e[{b2}]({p2},{q2})"),
                    res,
                    tol,
                );
            }
        }

        // Inner product symmetry and right compatibility.
        for p in 0..d {
            for q in 0..d {
                let sym = self.inner(p, q).adjoint();
                let res = sym
                    .add(&self.inner(q, p).scale(C::new(-T::one(), T::zero())))
                    .norm()
                    .unwrap_or(T::infinity());
                report.check(format!("inner symmetry ({p},{q})"), res, tol);
            }
        }
        for (b, up, uq) in a.unit_indices() {
            let u = a.unit::<T>(b, up, uq);
            let ru = self.right_of(&u);
            for p in 0..d {
                for q in 0..d {
                    // ⟨ε_p, ε_q·u⟩ = Σ_r (R_u)_{rq} ⟨ε_p, ε_r⟩ vs ⟨ε_p, ε_q⟩·u.
                    let mut lhs = self.algebra.zero::<T>();
                    for r in 0..d {
                        let coeff = ru[(r, q)];
                        if coeff != C::zero() {
                            lhs = lhs.add(&self.inner(p, r).scale(coeff));
                        }
                    }
                    let rhs = self.inner(p, q).mul(&u);
                    let res = lhs
                        .add(&rhs.scale(C::new(-T::one(), T::zero())))
                        .norm()
                        .unwrap_or(T::infinity());
                    report.check(
                        format!("inner right-linearity ({p},{q})·e[{b}]({up},{uq})"),
                        res,
                        tol,
                    );
                }
            }
        }

        // Scalar Gram positive semidefinite.
        let gram = self.scalar_gram();
        match hermitian_eigen(&gram) {
            Ok((values, _)) => {
                let min = values.last().copied().unwrap_or_else(T::zero);
                report.check("scalar Gram PSD", Float::max(-min, T::zero()), tol);
            }
            Err(_) => report.fail("scalar Gram PSD"),
        }

        // Left action: *-homomorphism (validated like a representation,
        // with unitality doubling as essentiality) plus adjointness with
        // respect to the A-valued inner product.
        if d > 0 {
            match AlgebraRep::new(a.clone(), d, self.left.clone()) {
                Ok(rep_like) => report.absorb(rep_like.validate(tol)),
                Err(_) => report.fail("left action shapes"),
            }
        }
        let res = op_norm(&(self.left_of(&a.one()) - eye::<T>(d))).unwrap_or(T::infinity());
        report.check("essential: φ(1) = I", res, tol);
        for (b, up, uq) in a.unit_indices() {
            let phi_u = self.left_unit(b, up, uq);
            let phi_uadj = self.left_unit(b, uq, up);
            for p in 0..d {
                for q in 0..d {
                    // ⟨φ(u)ε_p, ε_q⟩ = Σ_r conj(φ(u)_{rp}) ⟨ε_r, ε_q⟩
                    let mut lhs = self.algebra.zero::<T>();
                    for r in 0..d {
                        let coeff = phi_u[(r, p)].conj();
                        if coeff != C::zero() {
                            lhs = lhs.add(&self.inner(r, q).scale(coeff));
                        }
                    }
                    // ⟨ε_p, φ(u*)ε_q⟩ = Σ_r φ(u*)_{rq} ⟨ε_p, ε_r⟩
                    let mut rhs = self.algebra.zero::<T>();
                    for r in 0..d {
                        let coeff = phi_uadj[(r, q)];
                        if coeff != C::zero() {
                            rhs = rhs.add(&self.inner(p, r).scale(coeff));
                        }
                    }
                    let res = lhs
                        .add(&rhs.scale(C::new(-T::one(), T::zero())))
                        .norm()
                        .unwrap_or(T::infinity());
                    report.check(
                        format!("left adjointness e[{b}]({up},{uq}) at ({p},{q})"),
                        res,
                        tol,
                    );
                }
            }
        }
        report
    }
}

/// The identity correspondence: `A` as a bimodule over itself, on the
/// trace-orthonormal basis [`FinCStarAlgebra::orthonormal_basis`] (matrix
/// units scaled by `√n_b`, canonical order).
pub fn identity_correspondence<T: Real>(algebra: &FinCStarAlgebra) -> Correspondence<T> {
    let basis = algebra.orthonormal_basis::<T>();
    let d = basis.len();
    let coords = |el: &AlgebraElement<T>| -> Vec<C<T>> {
        // Coefficients in the orthonormal basis via τ(u_x* · el).
        basis
            .iter()
            .map(|u| algebra.trace(&u.adjoint().mul(el)))
            .collect()
    };
    let mut right = Vec::with_capacity(algebra.dim());
    let mut left = Vec::with_capacity(algebra.dim());
    for (b, p, q) in algebra.unit_indices() {
        let u = algebra.unit::<T>(b, p, q);
        let mut r = CMatrix::zeros(d, d);
        let mut l = CMatrix::zeros(d, d);
        for (x, bx) in basis.iter().enumerate() {
            for (row, c) in coords(&bx.mul(&u)).into_iter().enumerate() {
                r[(row, x)] = c;
            }
            for (row, c) in coords(&u.mul(bx)).into_iter().enumerate() {
                l[(row, x)] = c;
            }
        }
        right.push(r);
        left.push(l);
    }
    let mut inner = Vec::with_capacity(d * d);
    for x in &basis {
        for y in &basis {
            inner.push(x.adjoint().mul(y));
        }
    }
    Correspondence::new(algebra.clone(), d, right, left, inner)
        .expect("identity correspondence is well formed")
}

/// A quotient of an algebraic (semi-inner product) coordinate space by its
/// Gram null space, with an isometric coordinate map onto the quotient.
///
/// `embed` maps algebraic coordinates to orthonormal quotient coordinates
/// (the Euclidean inner product of images equals the Gram form of the
/// arguments); `lift` is the section with `embed·lift = I` and
/// `lift·embed` the orthogonal projection onto the complement of the Gram
/// null space.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpace<T: Real> {
    ambient_dim: usize,
    hilbert_dim: usize,
    embed: CMatrix<T>,
    lift: CMatrix<T>,
    gram: CMatrix<T>,
}

impl<T: Real> TensorSpace<T> {
    /// Builds the quotient of `ℂ^{ambient}` by the null space of a PSD Gram.
    ///
    /// Eigenvalues at or below `max(rank_rel·λ_max, abs_tol)` are treated as
    /// null; the quotient basis is ordered by descending Gram eigenvalue.
    pub fn from_gram(gram: CMatrix<T>, pol: &TolerancePolicy<T>) -> Result<Self> {
        let ambient = gram.nrows();
        if gram.ncols() != ambient {
            return Err(Error::DimensionMismatch {
                context: "TensorSpace gram".into(),
                expected: "square".into(),
                found: format!("{}x{}", gram.nrows(), gram.ncols()),
            });
        }
        let (values, vectors) = hermitian_eigen(&gram)?;
        let top = values.first().copied().unwrap_or_else(T::zero);
        let psd_slack = T::from_f64(100.0).unwrap();
        if let Some(&min) = values.last() {
            if min < -pol.abs_tol * psd_slack {
                return Err(Error::NotPsd {
                    context: "TensorSpace gram".into(),
                    min_eigenvalue: diag(min),
                });
            }
        }
        let cut = Float::max(pol.rank_rel * Float::max(top, T::zero()), pol.abs_tol);
        let rank = values.iter().filter(|v| **v > cut).count();
        let mut embed = CMatrix::zeros(rank, ambient);
        let mut lift = CMatrix::zeros(ambient, rank);
        for i in 0..rank {
            let s = Float::sqrt(values[i]);
            let v = vectors.column(i);
            for x in 0..ambient {
                embed[(i, x)] = v[x].conj().scale(s);
                lift[(x, i)] = v[x].unscale(s);
            }
        }
        Ok(TensorSpace {
            ambient_dim: ambient,
            hilbert_dim: rank,
            embed,
            lift,
            gram,
        })
    }

    /// Trivial quotient: Gram is the identity, coordinates unchanged.
    pub fn identity(dim: usize) -> Self {
        TensorSpace {
            ambient_dim: dim,
            hilbert_dim: dim,
            embed: eye(dim),
            lift: eye(dim),
            gram: eye(dim),
        }
    }

    /// Algebraic (pre-quotient) dimension.
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Dimension of the quotient Hilbert space.
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Isometric quotient map on coordinates (`hilbert_dim × ambient_dim`).
    pub fn embed(&self) -> &CMatrix<T> {
        &self.embed
    }

    /// Section of `embed` (`ambient_dim × hilbert_dim`), `embed·lift = I`.
    pub fn lift(&self) -> &CMatrix<T> {
        &self.lift
    }

    /// The ambient Gram matrix.
    pub fn gram(&self) -> &CMatrix<T> {
        &self.gram
    }

    /// Orthogonal projection (in ambient coordinates) onto the complement of
    /// the Gram null space; equals `lift·embed`.
    pub fn support_projection(&self) -> CMatrix<T> {
        &self.lift * &self.embed
    }

    /// Pushes an operator `X` given on ambient coordinates down to the
    /// quotient: `embed · X · lift`.
    pub fn compress(&self, x: &CMatrix<T>) -> CMatrix<T> {
        &self.embed * x * &self.lift
    }

    /// Residual of `X` (a map out of ambient coordinates) annihilating the
    /// Gram null space, i.e. being well defined on the quotient.
    pub fn annihilation_residual(&self, x: &CMatrix<T>) -> Result<T> {
        let n = self.ambient_dim;
        op_norm(&(x * (eye::<T>(n) - self.support_projection())))
    }
}

/// Shared quotient construction: given the A-valued Gram and the structure
/// maps of an algebraic generating family, quotient by the Gram null space
/// and transport the structure onto the orthonormal quotient basis.
fn quotient_correspondence<T: Real>(
    algebra: &FinCStarAlgebra,
    ambient: usize,
    avalued_gram: &[AlgebraElement<T>],
    right_amb: &[CMatrix<T>],
    left_amb: &[CMatrix<T>],
    pol: &TolerancePolicy<T>,
) -> Result<(Correspondence<T>, TensorSpace<T>)> {
    let scalar = CMatrix::from_fn(ambient, ambient, |p, q| {
        algebra.trace(&avalued_gram[p * ambient + q])
    });
    let space = TensorSpace::from_gram(scalar, pol)?;
    let d = space.hilbert_dim();
    let lift = space.lift();

    let mut inner = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = algebra.zero::<T>();
            for x in 0..ambient {
                let cx = lift[(x, i)].conj();
                if cx == C::zero() {
                    continue;
                }
                for y in 0..ambient {
                    let c = cx * lift[(y, j)];
                    if c != C::zero() {
                        acc = acc.add(&avalued_gram[x * ambient + y].scale(c));
                    }
                }
            }
            inner.push(acc);
        }
    }
    let right: Vec<CMatrix<T>> = right_amb.iter().map(|m| space.compress(m)).collect();
    let left: Vec<CMatrix<T>> = left_amb.iter().map(|m| space.compress(m)).collect();
    let corr = Correspondence::new(algebra.clone(), d, right, left, inner)?;
    Ok((corr, space))
}

/// Re-presents a correspondence on an orthonormal basis of its scalar Gram,
/// quotienting out any null directions. The returned [`TensorSpace`] maps
/// old coordinates to new ones.
pub fn orthonormalize<T: Real>(
    e: &Correspondence<T>,
    pol: &TolerancePolicy<T>,
) -> Result<(Correspondence<T>, TensorSpace<T>)> {
    let d = e.dim();
    let mut gram = Vec::with_capacity(d * d);
    for p in 0..d {
        for q in 0..d {
            gram.push(e.inner(p, q).clone());
        }
    }
    quotient_correspondence(e.algebra(), d, &gram, &e.right, &e.left, pol)
}

/// Internal tensor product `E ⊗_σ H`: the Hilbert space quotient of the
/// algebraic tensor coordinates under `⟨ξ⊗h, η⊗h′⟩ = ⟨h, σ(⟨ξ,η⟩) h′⟩`.
///
/// Coordinates are ordered basis-major: `(p, h) ↦ p·dim H + h`, matching the
/// Kronecker product convention used for operators.
pub fn internal_tensor<T: Real>(
    e: &Correspondence<T>,
    sigma: &AlgebraRep<T>,
    pol: &TolerancePolicy<T>,
) -> Result<TensorSpace<T>> {
    if e.algebra() != sigma.algebra() {
        return Err(Error::InvalidStructure(
            "internal_tensor: correspondence and representation over different algebras".into(),
        ));
    }
    let d = e.dim();
    let n = sigma.space_dim();
    let ambient = d * n;
    let mut gram = CMatrix::zeros(ambient, ambient);
    for p in 0..d {
        for q in 0..d {
            let block = sigma.apply(e.inner(p, q));
            gram.view_mut((p * n, q * n), (n, n)).copy_from(&block);
        }
    }
    TensorSpace::from_gram(gram, pol)
}

/// Tensor product of correspondences `E ⊗_A F`, with the A-valued null
/// space quotiented out.
///
/// On the quotient: `⟨ξ⊗μ, η⊗ν⟩ = ⟨μ, φ_F(⟨ξ,η⟩_E) ν⟩`, left action
/// `φ_E ⊗ id`, right action `id ⊗ right_F`. The returned [`TensorSpace`]
/// maps algebraic coordinates `(p, μ) ↦ p·dim F + μ` onto the quotient
/// basis.
pub fn corr_tensor<T: Real>(
    e: &Correspondence<T>,
    f: &Correspondence<T>,
    pol: &TolerancePolicy<T>,
) -> Result<(Correspondence<T>, TensorSpace<T>)> {
    if e.algebra() != f.algebra() {
        return Err(Error::InvalidStructure(
            "corr_tensor: correspondences over different algebras".into(),
        ));
    }
    let algebra = e.algebra();
    let de = e.dim();
    let df = f.dim();
    let ambient = de * df;

    // A-valued Gram of the algebraic tensor basis.
    let mut avalued = vec![algebra.zero::<T>(); ambient * ambient];
    for p in 0..de {
        for q in 0..de {
            let phi_g = f.left_of(e.inner(p, q));
            for mu in 0..df {
                for nu in 0..df {
                    // ⟨f_μ, φ_F(g) f_ν⟩ = Σ_{ν'} (φ_F(g))_{ν'ν} ⟨f_μ, f_{ν'}⟩.
                    let mut acc = algebra.zero::<T>();
                    for nu2 in 0..df {
                        let c = phi_g[(nu2, nu)];
                        if c != C::zero() {
                            acc = acc.add(&f.inner(mu, nu2).scale(c));
                        }
                    }
                    avalued[(p * df + mu) * ambient + (q * df + nu)] = acc;
                }
            }
        }
    }

    let right_amb: Vec<CMatrix<T>> = (0..algebra.dim())
        .map(|u| eye::<T>(de).kronecker(&f.right[u]))
        .collect();
    let left_amb: Vec<CMatrix<T>> = (0..algebra.dim())
        .map(|u| e.left[u].kronecker(&eye::<T>(df)))
        .collect();
    quotient_correspondence(algebra, ambient, &avalued, &right_amb, &left_amb, pol)
}

/// The induced representation `a ↦ φ(a) ⊗ I` of `A` on `E ⊗_π K`, together
/// with the tensor space carrying it.
pub fn compute_induced_rep<T: Real>(
    e: &Correspondence<T>,
    pi: &AlgebraRep<T>,
    pol: &TolerancePolicy<T>,
) -> Result<(AlgebraRep<T>, TensorSpace<T>)> {
    let space = internal_tensor(e, pi, pol)?;
    let n = pi.space_dim();
    let images = (0..e.algebra().dim())
        .map(|u| space.compress(&e.left[u].kronecker(&eye::<T>(n))))
        .collect();
    let rep = AlgebraRep::new(e.algebra().clone(), space.hilbert_dim(), images)?;
    Ok((rep, space))
}
