//! Product systems of C*-correspondences over `ℕ₀ᵏ`.
//!
//! A product system is a tuple `(E_1, …, E_k)` of correspondences over a
//! common algebra together with flip unitaries
//! `t_{i,j}: E_i ⊗ E_j → E_j ⊗ E_i` for `i > j`; we write `t_{i,i} = id`
//! and `t_{i,j} = t_{j,i}^{-1}` for `i < j`. The graded piece at a
//! multi-index `n ∈ ℕ₀ᵏ` is the ordered tensor
//! `𝔼(n) = E_1^{⊗n_1} ⊗ ⋯ ⊗ E_k^{⊗n_k}`, built left to right; every other
//! factor order is reached through [`ProductSystem::reorder_iso`], a product
//! of adjacent flips along a deterministic bubble-sort schedule. For `k ≥ 3`
//! the pairwise flips must satisfy the triple consistency identity (checked
//! by [`ProductSystem::validate`]); without it the reordering isomorphisms
//! would depend on the schedule.
//!
//! Internally every correspondence is re-presented on a τ-scalar
//! orthonormal basis, and each graded piece carries the cumulative quotient
//! maps between its own orthonormal coordinates and the algebraic word
//! coordinates of its factors. Adjacent flips act on word coordinates
//! through a structured reshape, so no operator on the full word space is
//! ever materialized.

use crate::corr::{corr_tensor, identity_correspondence, orthonormalize, Correspondence, TensorSpace};
use crate::cstar::FinCStarAlgebra;
use crate::numlin::{eye, op_norm, TolerancePolicy};
use crate::{CMatrix, Error, Real, Result, ValidationReport};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// A multi-index `n ∈ ℕ₀ᵏ`.
pub type MultiIndex = Vec<usize>;

/// Componentwise sum `m + n`.
pub fn mi_add(m: &[usize], n: &[usize]) -> MultiIndex {
    m.iter().zip(n).map(|(a, b)| a + b).collect()
}

/// Componentwise supremum `m ∨ n`.
pub fn mi_sup(m: &[usize], n: &[usize]) -> MultiIndex {
    m.iter().zip(n).map(|(a, b)| *a.max(b)).collect()
}

/// Componentwise order `m ≤ n`.
pub fn mi_leq(m: &[usize], n: &[usize]) -> bool {
    m.iter().zip(n).all(|(a, b)| a <= b)
}

/// Total degree `|n| = Σ n_i`.
pub fn mi_total(n: &[usize]) -> usize {
    n.iter().sum()
}

/// The standard generator `e_i ∈ ℕ₀ᵏ`.
pub fn mi_unit(k: usize, i: usize) -> MultiIndex {
    let mut n = vec![0; k];
    n[i] = 1;
    n
}

/// The canonical word of a multi-index: letter `i` repeated `n_i` times, in
/// ascending letter order (factor `E_1` first).
pub fn canonical_word(n: &[usize]) -> Vec<usize> {
    let mut w = Vec::with_capacity(mi_total(n));
    for (i, &c) in n.iter().enumerate() {
        w.extend(std::iter::repeat(i).take(c));
    }
    w
}

/// A graded piece `𝔼(n)` together with the quotient maps relating its
/// orthonormal coordinates to the algebraic word coordinates of the
/// canonical factor order.
///
/// For `n = 0` the piece is the identity correspondence `A` and the word
/// coordinate space is taken to be `A` itself (both maps are the identity).
#[derive(Debug, Clone, PartialEq)]
pub struct GradedPiece<T: Real> {
    n: MultiIndex,
    word: Vec<usize>,
    corr: Correspondence<T>,
    /// Piece coordinates from word coordinates (`dim × word_dim`).
    q: CMatrix<T>,
    /// Word coordinates from piece coordinates (`word_dim × dim`), a section
    /// of `q`.
    l: CMatrix<T>,
}

impl<T: Real> GradedPiece<T> {
    /// The multi-index.
    pub fn n(&self) -> &[usize] {
        &self.n
    }

    /// The canonical word (letter `i` repeated `n_i` times, ascending).
    pub fn word(&self) -> &[usize] {
        &self.word
    }

    /// The piece as a correspondence on an orthonormal basis.
    pub fn corr(&self) -> &Correspondence<T> {
        &self.corr
    }

    /// Quotient map from word coordinates onto piece coordinates.
    pub fn q(&self) -> &CMatrix<T> {
        &self.q
    }

    /// Section of [`GradedPiece::q`]: word coordinates of the piece basis.
    pub fn l(&self) -> &CMatrix<T> {
        &self.l
    }
}

/// The result of folding an arbitrary factor word into a correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct WordFold<T: Real> {
    /// The word that was folded.
    pub word: Vec<usize>,
    /// The iterated tensor product on an orthonormal basis.
    pub corr: Correspondence<T>,
    /// Fold coordinates from algebraic word coordinates.
    pub q: CMatrix<T>,
    /// Section of `q`.
    pub l: CMatrix<T>,
}

/// A product system over `ℕ₀ᵏ`.
#[derive(Debug)]
pub struct ProductSystem<T: Real> {
    algebra: FinCStarAlgebra,
    k: usize,
    corrs: Vec<Correspondence<T>>,
    input_spaces: Vec<TensorSpace<T>>,
    /// Flip of the ordered pair `(a, b)`, `a ≠ b`, on orthonormalized
    /// algebraic coordinates, stored flat at `a·k + b`; the diagonal entries
    /// are unused placeholders.
    flips: Vec<CMatrix<T>>,
    /// Quotient of `E_a ⊗ E_b` for `a ≠ b`, flat at `a·k + b`.
    pair_spaces: Vec<Option<TensorSpace<T>>>,
    cache: Mutex<HashMap<MultiIndex, Arc<GradedPiece<T>>>>,
}

impl<T: Real> Clone for ProductSystem<T> {
    fn clone(&self) -> Self {
        ProductSystem {
            algebra: self.algebra.clone(),
            k: self.k,
            corrs: self.corrs.clone(),
            input_spaces: self.input_spaces.clone(),
            flips: self.flips.clone(),
            pair_spaces: self.pair_spaces.clone(),
            cache: Mutex::new(self.cache.lock().expect("piece cache").clone()),
        }
    }
}

impl<T: Real> ProductSystem<T> {
    /// Builds a product system from correspondences over a common algebra
    /// and one flip matrix per pair `i > j`, given on the algebraic tensor
    /// coordinates of the correspondences as presented.
    ///
    /// The correspondences are re-presented internally on orthonormal bases
    /// (see [`ProductSystem::input_space`] for the coordinate change) and
    /// the flips are transported accordingly; `t_{i,j}` for `i < j` is
    /// derived as the adjoint of the quotient descent of `t_{j,i}`.
    pub fn new(
        correspondences: Vec<Correspondence<T>>,
        flips: Vec<((usize, usize), CMatrix<T>)>,
        pol: &TolerancePolicy<T>,
    ) -> Result<Self> {
        let k = correspondences.len();
        if k == 0 {
            return Err(Error::InvalidStructure(
                "product system needs at least one correspondence".into(),
            ));
        }
        let algebra = correspondences[0].algebra().clone();
        for e in &correspondences {
            if e.algebra() != &algebra {
                return Err(Error::InvalidStructure(
                    "product system correspondences over different algebras".into(),
                ));
            }
        }
        let mut corrs = Vec::with_capacity(k);
        let mut input_spaces = Vec::with_capacity(k);
        for e in &correspondences {
            let (on, space) = orthonormalize(e, pol)?;
            corrs.push(on);
            input_spaces.push(space);
        }

        // Collect the user flips for i > j.
        let mut given: Vec<Option<CMatrix<T>>> = vec![None; k * k];
        for ((i, j), t) in flips {
            if i >= k || j >= k || i <= j {
                return Err(Error::InvalidStructure(format!(
                    "flip index ({i},{j}) out of range or not lower-triangular"
                )));
            }
            let rows = correspondences[j].dim() * correspondences[i].dim();
            let cols = correspondences[i].dim() * correspondences[j].dim();
            if t.nrows() != rows || t.ncols() != cols {
                return Err(Error::DimensionMismatch {
                    context: format!("flip ({i},{j})"),
                    expected: format!("{rows}x{cols}"),
                    found: format!("{}x{}", t.nrows(), t.ncols()),
                });
            }
            given[i * k + j] = Some(t);
        }
        for i in 0..k {
            for j in 0..i {
                if given[i * k + j].is_none() {
                    return Err(Error::InvalidStructure(format!(
                        "missing flip for pair ({i},{j})"
                    )));
                }
            }
        }

        // Pair quotients on orthonormalized coordinates.
        let mut pair_spaces: Vec<Option<TensorSpace<T>>> = vec![None; k * k];
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    let (_, space) = corr_tensor(&corrs[a], &corrs[b], pol)?;
                    pair_spaces[a * k + b] = Some(space);
                }
            }
        }

        // Transport user flips to orthonormalized coordinates and derive the
        // inverse direction through the quotient.
        let mut all_flips: Vec<CMatrix<T>> = vec![CMatrix::zeros(0, 0); k * k];
        for i in 0..k {
            for j in 0..i {
                let t = given[i * k + j].take().expect("checked above");
                let conv = input_spaces[j].embed().kronecker(input_spaces[i].embed())
                    * t
                    * input_spaces[i].lift().kronecker(input_spaces[j].lift());
                let s_ij = pair_spaces[i * k + j].as_ref().expect("off-diagonal");
                let s_ji = pair_spaces[j * k + i].as_ref().expect("off-diagonal");
                // Quotient descent and its adjoint, lifted back to algebraic
                // coordinates as the flip for (j, i).
                let hat = s_ji.embed() * &conv * s_ij.lift();
                let rev = s_ij.lift() * hat.adjoint() * s_ji.embed();
                all_flips[i * k + j] = conv;
                all_flips[j * k + i] = rev;
            }
        }

        Ok(ProductSystem {
            algebra,
            k,
            corrs,
            input_spaces,
            flips: all_flips,
            pair_spaces,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// The base algebra.
    pub fn algebra(&self) -> &FinCStarAlgebra {
        &self.algebra
    }

    /// Number of generating directions `k`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// The `i`-th correspondence, on its orthonormal internal basis.
    pub fn corr(&self, i: usize) -> &Correspondence<T> {
        &self.corrs[i]
    }

    /// Coordinate change from the `i`-th correspondence as originally
    /// presented onto the orthonormal internal basis.
    pub fn input_space(&self, i: usize) -> &TensorSpace<T> {
        &self.input_spaces[i]
    }

    /// The flip `t_{a,b}: E_a ⊗ E_b → E_b ⊗ E_a` on orthonormalized
    /// algebraic coordinates; `None` when `a = b` (the identity).
    pub fn flip_alg(&self, a: usize, b: usize) -> Option<&CMatrix<T>> {
        if a == b {
            None
        } else {
            Some(&self.flips[a * self.k + b])
        }
    }

    /// Quotient space of `E_a ⊗ E_b` (`a ≠ b`) on orthonormalized
    /// coordinates.
    pub fn pair_space(&self, a: usize, b: usize) -> Option<&TensorSpace<T>> {
        self.pair_spaces[a * self.k + b].as_ref()
    }

    /// Folds an arbitrary factor word into a correspondence with cumulative
    /// quotient maps. The empty word folds to the identity correspondence,
    /// with the algebra coordinate space playing the role of the word space.
    pub fn fold_word(&self, word: &[usize], pol: &TolerancePolicy<T>) -> Result<WordFold<T>> {
        for &i in word {
            if i >= self.k {
                return Err(Error::InvalidStructure(format!(
                    "word letter {i} out of range for k = {}",
                    self.k
                )));
            }
        }
        if word.is_empty() {
            let corr = identity_correspondence::<T>(&self.algebra);
            let d = corr.dim();
            return Ok(WordFold {
                word: Vec::new(),
                corr,
                q: eye(d),
                l: eye(d),
            });
        }
        let first = &self.corrs[word[0]];
        let mut fold = WordFold {
            word: vec![word[0]],
            corr: first.clone(),
            q: eye(first.dim()),
            l: eye(first.dim()),
        };
        for &j in &word[1..] {
            let next = &self.corrs[j];
            let (corr, space) = corr_tensor(&fold.corr, next, pol)?;
            let idj = eye::<T>(next.dim());
            fold = WordFold {
                word: {
                    let mut w = fold.word;
                    w.push(j);
                    w
                },
                q: space.embed() * fold.q.kronecker(&idj),
                l: fold.l.kronecker(&idj) * space.lift(),
                corr,
            };
        }
        Ok(fold)
    }

    /// The graded piece `𝔼(n)`, built along the canonical word and memoized.
    pub fn build_piece(&self, n: &[usize], pol: &TolerancePolicy<T>) -> Result<Arc<GradedPiece<T>>> {
        if n.len() != self.k {
            return Err(Error::DimensionMismatch {
                context: "build_piece".into(),
                expected: format!("multi-index of length {}", self.k),
                found: format!("{}", n.len()),
            });
        }
        if let Some(hit) = self.cache.lock().expect("piece cache").get(n) {
            return Ok(hit.clone());
        }
        let word = canonical_word(n);
        let fold = self.fold_word(&word, pol)?;
        let piece = Arc::new(GradedPiece {
            n: n.to_vec(),
            word: fold.word,
            corr: fold.corr,
            q: fold.q,
            l: fold.l,
        });
        self.cache
            .lock()
            .expect("piece cache")
            .insert(n.to_vec(), piece.clone());
        Ok(piece)
    }

    /// Applies the adjacent-position flip schedule to a matrix of word-space
    /// columns, starting from `source`; returns the transported matrix and
    /// the resulting word. Swapping two equal letters is the identity.
    fn apply_schedule(
        &self,
        source: &[usize],
        schedule: &[usize],
        m: CMatrix<T>,
    ) -> Result<(CMatrix<T>, Vec<usize>)> {
        let mut word = source.to_vec();
        let mut m = m;
        for &pos in schedule {
            if pos + 1 >= word.len() {
                return Err(Error::InvalidStructure(format!(
                    "flip position {pos} out of range for word length {}",
                    word.len()
                )));
            }
            let (a, b) = (word[pos], word[pos + 1]);
            if a != b {
                let dims: Vec<usize> = word.iter().map(|&i| self.corrs[i].dim()).collect();
                let t = self.flip_alg(a, b).expect("a != b");
                m = apply_adjacent_flip(&m, &dims, pos, t)?;
            }
            word.swap(pos, pos + 1);
        }
        Ok((m, word))
    }

    /// The reordering isomorphism between the folds of two words that are
    /// permutations of the same multiset, as a unitary from the source fold
    /// coordinates to the target fold coordinates.
    pub fn reorder_iso(
        &self,
        source: &[usize],
        target: &[usize],
        pol: &TolerancePolicy<T>,
    ) -> Result<CMatrix<T>> {
        let schedule = bubble_schedule(source, target)?;
        let src = self.fold_word(source, pol)?;
        let (m, word) = self.apply_schedule(source, &schedule, src.l)?;
        debug_assert_eq!(word, target);
        let tgt = self.fold_word(target, pol)?;
        Ok(tgt.q * m)
    }

    /// The canonical unitary from the quotient of `𝔼(m) ⊗ 𝔼(n)` onto
    /// `𝔼(m+n)`, combining the tensor quotient, the concatenated word fold
    /// and the reordering onto the canonical word.
    ///
    /// For `m = 0` or `n = 0` this is the left/right unit isomorphism
    /// (`a ⊗ ξ ↦ φ(a)ξ`, `ξ ⊗ a ↦ ξ·a`).
    pub fn merge_iso(
        &self,
        m: &[usize],
        n: &[usize],
        pol: &TolerancePolicy<T>,
    ) -> Result<CMatrix<T>> {
        let pm = self.build_piece(m, pol)?;
        let pn = self.build_piece(n, pol)?;
        let (_, s) = corr_tensor(pm.corr(), pn.corr(), pol)?;
        if mi_total(m) == 0 {
            // A ⊗ F → F, a ⊗ f ↦ φ(a) f, on the orthonormal algebra basis.
            let basis = self.algebra.orthonormal_basis::<T>();
            let df = pn.corr().dim();
            let mut map = CMatrix::zeros(df, basis.len() * df);
            for (x, u) in basis.iter().enumerate() {
                let phi = pn.corr().left_of(u);
                map.view_mut((0, x * df), (df, df)).copy_from(&phi);
            }
            return Ok(map * s.lift());
        }
        if mi_total(n) == 0 {
            // F ⊗ A → F, f ⊗ a ↦ f·a.
            let basis = self.algebra.orthonormal_basis::<T>();
            let df = pm.corr().dim();
            let da = basis.len();
            let mut map = CMatrix::zeros(df, df * da);
            for (x, u) in basis.iter().enumerate() {
                let r = pm.corr().right_of(u);
                for f in 0..df {
                    for row in 0..df {
                        map[(row, f * da + x)] = r[(row, f)];
                    }
                }
            }
            return Ok(map * s.lift());
        }
        let source: Vec<usize> = pm.word().iter().chain(pn.word()).copied().collect();
        let total = mi_add(m, n);
        let target = canonical_word(&total);
        let schedule = bubble_schedule(&source, &target)?;
        let m0 = pm.l().kronecker(pn.l()) * s.lift();
        let (mat, word) = self.apply_schedule(&source, &schedule, m0)?;
        debug_assert_eq!(word, target);
        let tgt = self.build_piece(&total, pol)?;
        Ok(tgt.q() * mat)
    }

    /// Checks all product-system axioms within `tol`: each correspondence,
    /// unitarity of the quotient descent of each flip, the bimodule property
    /// of each flip, and for `k ≥ 3` the triple consistency identity.
    pub fn validate(&self, tol: T) -> ValidationReport {
        let mut report = ValidationReport::new("product system");
        for e in &self.corrs {
            report.absorb(e.validate(tol));
        }
        let a = &self.algebra;
        for i in 0..self.k {
            for j in 0..i {
                let s_ij = self.pair_space(i, j).expect("off-diagonal");
                let s_ji = self.pair_space(j, i).expect("off-diagonal");
                let t = self.flip_alg(i, j).expect("i > j");
                if s_ij.hilbert_dim() != s_ji.hilbert_dim() {
                    report.fail(format!("flip ({i},{j}) quotient dims"));
                    continue;
                }
                let hat = s_ji.embed() * t * s_ij.lift();
                let d = s_ij.hilbert_dim();
                let res_iso = op_norm(&(hat.adjoint() * &hat - eye::<T>(d)))
                    .unwrap_or(T::infinity());
                let res_coiso = op_norm(&(&hat * hat.adjoint() - eye::<T>(d)))
                    .unwrap_or(T::infinity());
                report.check(format!("flip ({i},{j}) isometric on quotient"), res_iso, tol);
                report.check(format!("flip ({i},{j}) coisometric on quotient"), res_coiso, tol);

                let (di, dj) = (self.corrs[i].dim(), self.corrs[j].dim());
                for (b, p, q) in a.unit_indices() {
                    let u = a.unit::<T>(b, p, q);
                    let lhs_l = t * self.corrs[i].left_of(&u).kronecker(&eye::<T>(dj));
                    let rhs_l = self.corrs[j].left_of(&u).kronecker(&eye::<T>(di)) * t;
                    let res = op_norm(&(s_ji.embed() * (lhs_l - rhs_l) * s_ij.lift()))
                        .unwrap_or(T::infinity());
                    report.check(
                        format!("flip ({i},{j}) left-module at e[{b}]({p},{q})"),
                        res,
                        tol,
                    );
                    let lhs_r = t * eye::<T>(di).kronecker(&self.corrs[j].right_of(&u));
                    let rhs_r = eye::<T>(dj).kronecker(&self.corrs[i].right_of(&u)) * t;
                    let res = op_norm(&(s_ji.embed() * (lhs_r - rhs_r) * s_ij.lift()))
                        .unwrap_or(T::infinity());
                    report.check(
                        format!("flip ({i},{j}) right-module at e[{b}]({p},{q})"),
                        res,
                        tol,
                    );
                }
            }
        }
        // Triple consistency: both hexagon paths from word [i, j, l] to
        // [l, j, i] must give the same isomorphism.
        let pol = TolerancePolicy::<T>::default();
        for i in 0..self.k {
            for j in 0..i {
                for l in 0..j {
                    let source = vec![i, j, l];
                    match self.triple_residual(&source, &pol) {
                        Ok(res) => {
                            report.check(format!("flip consistency ({i},{j},{l})"), res, tol)
                        }
                        Err(_) => report.fail(format!("flip consistency ({i},{j},{l})")),
                    }
                }
            }
        }
        report
    }

    fn triple_residual(&self, source: &[usize], pol: &TolerancePolicy<T>) -> Result<T> {
        let src = self.fold_word(source, pol)?;
        let (m1, w1) = self.apply_schedule(source, &[0, 1, 0], src.l.clone())?;
        let (m2, w2) = self.apply_schedule(source, &[1, 0, 1], src.l)?;
        debug_assert_eq!(w1, w2);
        let tgt = self.fold_word(&w1, pol)?;
        op_norm(&(tgt.q * (m1 - m2)))
    }
}

/// Applies `I ⊗ t ⊗ I` at adjacent word positions `(pos, pos+1)` to each
/// column of `m` (rows indexed by word coordinates of `dims`) without
/// materializing the full operator.
pub fn apply_adjacent_flip<T: Real>(
    m: &CMatrix<T>,
    dims: &[usize],
    pos: usize,
    t: &CMatrix<T>,
) -> Result<CMatrix<T>> {
    let word_dim: usize = dims.iter().product();
    if m.nrows() != word_dim {
        return Err(Error::DimensionMismatch {
            context: "apply_adjacent_flip".into(),
            expected: format!("{word_dim} rows"),
            found: format!("{}", m.nrows()),
        });
    }
    let d = dims[pos] * dims[pos + 1];
    if t.nrows() != d || t.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "apply_adjacent_flip pair".into(),
            expected: format!("{d}x{d}"),
            found: format!("{}x{}", t.nrows(), t.ncols()),
        });
    }
    let pre: usize = dims[..pos].iter().product();
    let post: usize = dims[pos + 2..].iter().product();
    let mut out = CMatrix::zeros(word_dim, m.ncols());
    let mut slice = CMatrix::zeros(d, 1);
    for c in 0..m.ncols() {
        for a in 0..pre {
            for b in 0..post {
                for r in 0..d {
                    slice[(r, 0)] = m[((a * d + r) * post + b, c)];
                }
                let moved = t * &slice;
                for r in 0..d {
                    out[((a * d + r) * post + b, c)] = moved[(r, 0)];
                }
            }
        }
    }
    Ok(out)
}

/// Deterministic bubble-sort schedule of adjacent swap positions carrying
/// `source` onto `target`; errors unless the words are permutations of the
/// same multiset.
pub fn bubble_schedule(source: &[usize], target: &[usize]) -> Result<Vec<usize>> {
    let mut sorted_s = source.to_vec();
    let mut sorted_t = target.to_vec();
    sorted_s.sort_unstable();
    sorted_t.sort_unstable();
    if sorted_s != sorted_t {
        return Err(Error::InvalidStructure(
            "words are not permutations of the same multiset".into(),
        ));
    }
    let mut cur = source.to_vec();
    let mut schedule = Vec::new();
    for t in 0..target.len() {
        let p = (t..cur.len())
            .find(|&p| cur[p] == target[t])
            .expect("multisets match");
        for pos in (t..p).rev() {
            cur.swap(pos, pos + 1);
            schedule.push(pos);
        }
    }
    debug_assert_eq!(cur, target);
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::internal_tensor;
    use crate::C;
    use proptest::prelude::*;

    fn pol() -> TolerancePolicy<f64> {
        TolerancePolicy::default()
    }

    /// `k` scalar lines over `A = ℂ` with unimodular flip phases
    /// `t_{i,j} = λ_{ij}` for `i > j`.
    fn scalar_system(k: usize, phases: &[((usize, usize), C<f64>)]) -> ProductSystem<f64> {
        let a = FinCStarAlgebra::new(vec![1]).unwrap();
        let line = identity_correspondence::<f64>(&a);
        let corrs = vec![line; k];
        let flips = phases
            .iter()
            .map(|&((i, j), lambda)| ((i, j), CMatrix::from_fn(1, 1, |_, _| lambda)))
            .collect();
        ProductSystem::new(corrs, flips, &pol()).unwrap()
    }

    /// `E_i = ℂ^{d_i}` over `ℂ` with the literal tensor swap as each flip.
    fn swap_system(dims: &[usize]) -> ProductSystem<f64> {
        let a = FinCStarAlgebra::new(vec![1]).unwrap();
        let corrs: Vec<Correspondence<f64>> = dims
            .iter()
            .map(|&d| {
                let mut inner = Vec::new();
                for p in 0..d {
                    for q in 0..d {
                        inner.push(if p == q { a.one() } else { a.zero() });
                    }
                }
                Correspondence::new(a.clone(), d, vec![eye(d)], vec![eye(d)], inner).unwrap()
            })
            .collect();
        let mut flips = Vec::new();
        for i in 0..dims.len() {
            for j in 0..i {
                let (di, dj) = (dims[i], dims[j]);
                let mut t = CMatrix::zeros(dj * di, di * dj);
                for mu in 0..di {
                    for nu in 0..dj {
                        t[(nu * di + mu, mu * dj + nu)] = C::new(1.0, 0.0);
                    }
                }
                flips.push(((i, j), t));
            }
        }
        ProductSystem::new(corrs, flips, &pol()).unwrap()
    }

    /// One-edge graph correspondence as a k=1 system.
    fn one_edge_system() -> ProductSystem<f64> {
        let a = FinCStarAlgebra::new(vec![1, 1]).unwrap();
        let right = vec![
            CMatrix::from_fn(1, 1, |_, _| C::new(0.0, 0.0)),
            CMatrix::from_fn(1, 1, |_, _| C::new(1.0, 0.0)),
        ];
        let left = vec![
            CMatrix::from_fn(1, 1, |_, _| C::new(1.0, 0.0)),
            CMatrix::from_fn(1, 1, |_, _| C::new(0.0, 0.0)),
        ];
        let inner = vec![a.unit::<f64>(1, 0, 0)];
        let e = Correspondence::new(a, 1, right, left, inner).unwrap();
        ProductSystem::new(vec![e], vec![], &pol()).unwrap()
    }

    #[test]
    fn zero_piece_is_the_algebra() {
        let ps = scalar_system(2, &[((1, 0), C::new(1.0, 0.0))]);
        let piece = ps.build_piece(&[0, 0], &pol()).unwrap();
        assert_eq!(piece.corr().dim(), ps.algebra().dim());
    }

    #[test]
    fn scalar_pieces_are_lines() {
        let lambda = C::from_polar(1.0, 0.7);
        let ps = scalar_system(2, &[((1, 0), lambda)]);
        for n in [[0, 1], [2, 0], [2, 3]] {
            assert_eq!(ps.build_piece(&n, &pol()).unwrap().corr().dim(), 1);
        }
        assert!(ps.validate(1e-9).passed());
    }

    #[test]
    fn graph_piece_without_paths_is_zero() {
        let ps = one_edge_system();
        let piece = ps.build_piece(&[2], &pol()).unwrap();
        assert_eq!(piece.corr().dim(), 0);
        assert!(ps.validate(1e-9).passed());
    }

    #[test]
    fn reorder_of_unchanged_word_is_identity() {
        let ps = swap_system(&[2, 3]);
        let u = ps.reorder_iso(&[0, 1, 1], &[0, 1, 1], &pol()).unwrap();
        let d = u.nrows();
        assert_eq!(d, 18);
        assert!(op_norm(&(u - eye::<f64>(d))).unwrap() <= 1e-12);
    }

    #[test]
    fn scalar_phase_reorder_matches_flip() {
        let lambda = C::from_polar(1.0, 1.1);
        let ps = scalar_system(2, &[((1, 0), lambda)]);
        // Moving the higher-index factor from the front to the back applies
        // the stored flip.
        let u = ps.reorder_iso(&[1, 0], &[0, 1], &pol()).unwrap();
        assert!((u[(0, 0)] - lambda).norm() <= 1e-12);
        // The reverse direction is the inverse phase.
        let v = ps.reorder_iso(&[0, 1], &[1, 0], &pol()).unwrap();
        assert!((v[(0, 0)] - lambda.conj()).norm() <= 1e-12);
        // Round trip is the identity.
        assert!(((u * v)[(0, 0)] - C::new(1.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn non_unimodular_phase_fails_validation() {
        let ps = scalar_system(2, &[((1, 0), C::new(1.3, 0.0))]);
        let report = ps.validate(1e-9);
        assert!(!report.passed());
        assert!(report
            .violations
            .iter()
            .any(|v| v.name.contains("isometric")));
    }

    #[test]
    fn reorder_rejects_different_multisets() {
        let ps = swap_system(&[2, 3]);
        assert!(ps.reorder_iso(&[0, 1], &[1, 1], &pol()).is_err());
    }

    #[test]
    fn schedule_independence_on_a_k3_system() {
        let ps = swap_system(&[2, 3, 2]);
        assert!(ps.validate(1e-9).passed());
        let source = [2, 1, 0];
        let src = ps.fold_word(&source, &pol()).unwrap();
        let (m1, w1) = ps.apply_schedule(&source, &[0, 1, 0], src.l.clone()).unwrap();
        let (m2, w2) = ps.apply_schedule(&source, &[1, 0, 1], src.l).unwrap();
        assert_eq!(w1, w2);
        let tgt = ps.fold_word(&w1, &pol()).unwrap();
        let j1 = &tgt.q * m1;
        let j2 = &tgt.q * m2;
        assert!(op_norm(&(j1 - j2)).unwrap() <= 1e-9);
    }

    #[test]
    fn reorder_round_trip_is_identity() {
        let ps = swap_system(&[2, 2, 3]);
        let w1 = [0, 2, 1, 0];
        let w2 = [2, 0, 0, 1];
        let u = ps.reorder_iso(&w1, &w2, &pol()).unwrap();
        let v = ps.reorder_iso(&w2, &w1, &pol()).unwrap();
        let d = u.nrows();
        assert!(op_norm(&(u * v - eye::<f64>(d))).unwrap() <= 1e-9);
    }

    #[test]
    fn merge_iso_is_unitary_and_dims_add() {
        let ps = swap_system(&[2, 3, 2]);
        let m = [1, 1, 0];
        let n = [0, 1, 1];
        let pm = ps.build_piece(&m, &pol()).unwrap();
        let pn = ps.build_piece(&n, &pol()).unwrap();
        let total = ps.build_piece(&mi_add(&m, &n), &pol()).unwrap();
        assert_eq!(
            total.corr().dim(),
            pm.corr().dim() * pn.corr().dim(),
            "full system: no null directions"
        );
        let u = ps.merge_iso(&m, &n, &pol()).unwrap();
        assert_eq!(u.nrows(), total.corr().dim());
        assert!(op_norm(&(u.adjoint() * &u - eye::<f64>(u.ncols()))).unwrap() <= 1e-9);
        assert!(op_norm(&(&u * u.adjoint() - eye::<f64>(u.nrows()))).unwrap() <= 1e-9);
    }

    #[test]
    fn merge_iso_with_unit_pieces() {
        let ps = one_edge_system();
        let zero = [0];
        let one = [1];
        for (m, n) in [(&zero, &one), (&one, &zero), (&zero, &zero)] {
            let u = ps.merge_iso(m.as_slice(), n.as_slice(), &pol()).unwrap();
            let total = ps.build_piece(&mi_add(m, n), &pol()).unwrap();
            assert_eq!(u.nrows(), total.corr().dim());
            assert!(
                op_norm(&(u.adjoint() * &u - eye::<f64>(u.ncols()))).unwrap() <= 1e-9,
                "unit merge ({m:?},{n:?}) is isometric"
            );
            assert!(
                op_norm(&(&u * u.adjoint() - eye::<f64>(u.nrows()))).unwrap() <= 1e-9,
                "unit merge ({m:?},{n:?}) is counitary"
            );
        }
    }

    #[test]
    fn piece_fold_matches_internal_tensor_dimensions() {
        // Cross-check fold dimensions against the Hilbert-space dimension
        // of the piece tensored with the defining representation.
        let ps = one_edge_system();
        let piece = ps.build_piece(&[1], &pol()).unwrap();
        let sigma = ps.algebra().defining_rep::<f64>();
        let space = internal_tensor(piece.corr(), &sigma, &pol()).unwrap();
        assert_eq!(space.hilbert_dim(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scalar_system_merge_and_reorder_are_unitary(
            theta in 0.0f64..6.28,
            m0 in 0usize..3, m1 in 0usize..3,
            n0 in 0usize..3, n1 in 0usize..3,
        ) {
            let lambda = C::from_polar(1.0, theta);
            let ps = scalar_system(2, &[((1, 0), lambda)]);
            let m = [m0, m1];
            let n = [n0, n1];
            let u = ps.merge_iso(&m, &n, &pol()).unwrap();
            prop_assert!((u[(0, 0)].norm() - 1.0).abs() <= 1e-9);
            let w1 = canonical_word(&m);
            let mut w2 = w1.clone();
            w2.reverse();
            let r1 = ps.reorder_iso(&w1, &w2, &pol()).unwrap();
            let r2 = ps.reorder_iso(&w2, &w1, &pol()).unwrap();
            if !w1.is_empty() {
                prop_assert!(((r1 * r2)[(0, 0)] - C::new(1.0, 0.0)).norm() <= 1e-9);
            }
        }
    }
}
