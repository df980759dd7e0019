//! Shared numerical plumbing: small dense kernels, complex CSR matrices,
//! weighted inner products, conjugate gradients and a weighted Hermitian
//! eigensolve on top of LAPACK.
//!
//! The discrete Hamiltonians built in [`crate::operator`] are sparse with
//! small dense blocks; everything here works on flat `&[C64]` state vectors
//! so the evolution and spectral layers can share one representation.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, C64};

/// Deterministic RNG used for every randomized probe in the library.
///
/// All stochastic diagnostics (symmetry residuals, energy-estimate trials,
/// random symbol points) derive their streams from a config-level seed so
/// repeated runs are bit-identical.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random complex vector with i.i.d. entries uniform in the unit square.
pub fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

/// Weighted inner product `⟨u, v⟩_w = Σ_i w_i conj(u_i) v_i`.
pub fn dot_w(w: &[f64], u: &[C64], v: &[C64]) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    debug_assert_eq!(u.len(), w.len());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..u.len() {
        acc += w[i] * u[i].conj() * v[i];
    }
    acc
}

/// Weighted norm `sqrt(⟨u, u⟩_w)`.
pub fn norm_w(w: &[f64], u: &[C64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..u.len() {
        acc += w[i] * u[i].norm_sqr();
    }
    acc.sqrt()
}

/// Unweighted complex dot product `Σ conj(u_i) v_i`.
pub fn cdot(u: &[C64], v: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..u.len() {
        acc += u[i].conj() * v[i];
    }
    acc
}

/// Euclidean norm of a complex slice.
pub fn norm2(u: &[C64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry magnitude of a complex matrix.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Inverse and determinant of a small real matrix (dimension ≤ 4 in
/// practice) by Gauss–Jordan elimination with partial pivoting.
pub fn inv_det_small(a: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidParameter("inv_det_small: non-square".into()));
    }
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[[r, col]].abs() > m[[piv, col]].abs() {
                piv = r;
            }
        }
        if m[[piv, col]].abs() < 1e-300 {
            return Err(Error::Degenerate(format!(
                "singular matrix in inv_det_small (pivot {col})"
            )));
        }
        if piv != col {
            for c in 0..n {
                m.swap([piv, c], [col, c]);
                inv.swap([piv, c], [col, c]);
            }
            det = -det;
        }
        let d = m[[col, col]];
        det *= d;
        for c in 0..n {
            m[[col, c]] /= d;
            inv[[col, c]] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                if f != 0.0 {
                    for c in 0..n {
                        m[[r, c]] -= f * m[[col, c]];
                        inv[[r, c]] -= f * inv[[col, c]];
                    }
                }
            }
        }
    }
    Ok((inv, det))
}

/// Determinant of a small complex matrix by LU with partial pivoting.
pub fn cdet(a: &Array2<C64>) -> C64 {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "cdet: non-square");
    let mut m = a.clone();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[[r, col]].norm() > m[[piv, col]].norm() {
                piv = r;
            }
        }
        if m[[piv, col]].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != col {
            for c in 0..n {
                m.swap([piv, c], [col, c]);
            }
            det = -det;
        }
        let d = m[[col, col]];
        det *= d;
        for r in col + 1..n {
            let f = m[[r, col]] / d;
            if f.norm() != 0.0 {
                for c in col..n {
                    let v = m[[col, c]];
                    m[[r, c]] -= f * v;
                }
            }
        }
    }
    det
}

/// Hermitian part `(a + a†)/2`.
pub fn herm_part(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut out = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]].conj());
        }
    }
    out
}

/// Compressed sparse row matrix over `C64`.
///
/// Rows are stored sorted by column; duplicate triplets are summed during
/// construction. This is deliberately minimal: construction, application,
/// (weighted) adjoints, sums and square sub-matrix restriction are all the
/// operator layer needs.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

impl Csr {
    /// Build from (row, col, value) triplets, summing duplicates and
    /// dropping exact zeros.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Csr {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols, "triplet out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        // Drop entries that summed to exactly zero to keep patterns tight.
        let mut f_indptr = vec![0usize; n_rows + 1];
        let mut f_indices = Vec::with_capacity(indices.len());
        let mut f_data = Vec::with_capacity(data.len());
        for r in 0..n_rows {
            for k in indptr[r]..indptr[r + 1] {
                if data[k] != C64::new(0.0, 0.0) {
                    f_indices.push(indices[k]);
                    f_data.push(data[k]);
                    f_indptr[r + 1] += 1;
                }
            }
        }
        for r in 0..n_rows {
            f_indptr[r + 1] += f_indptr[r];
        }
        Csr {
            n_rows,
            n_cols,
            indptr: f_indptr,
            indices: f_indices,
            data: f_data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply_alloc(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n_rows];
        self.apply(x, &mut y);
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Csr {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                trip.push((self.indices[k], r, self.data[k].conj()));
            }
        }
        Csr::from_triplets(self.n_cols, self.n_rows, trip)
    }

    /// Adjoint with respect to the weighted product `⟨u,v⟩_w`:
    /// `A†_w = W^{-1} A† W` for a positive diagonal weight `w`.
    pub fn adjoint_w(&self, w: &[f64]) -> Csr {
        debug_assert_eq!(self.n_rows, self.n_cols);
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                trip.push((c, r, self.data[k].conj() * (w[r] / w[c])));
            }
        }
        Csr::from_triplets(self.n_cols, self.n_rows, trip)
    }

    /// `½ (A + A†_w)` — the w-Hermitian part.
    pub fn symmetrize_w(&self, w: &[f64]) -> Csr {
        self.add_scaled(&self.adjoint_w(w), C64::new(1.0, 0.0))
            .scaled(C64::new(0.5, 0.0))
    }

    /// `A + α B`.
    pub fn add_scaled(&self, other: &Csr, alpha: C64) -> Csr {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                trip.push((r, self.indices[k], self.data[k]));
            }
            for k in other.indptr[r]..other.indptr[r + 1] {
                trip.push((r, other.indices[k], alpha * other.data[k]));
            }
        }
        Csr::from_triplets(self.n_rows, self.n_cols, trip)
    }

    pub fn scaled(&self, alpha: C64) -> Csr {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= alpha;
        }
        out
    }

    /// Square restriction to a sorted subset of indices (rows and columns).
    pub fn restrict(&self, keep: &[usize]) -> Csr {
        debug_assert_eq!(self.n_rows, self.n_cols);
        let mut newpos = vec![usize::MAX; self.n_cols];
        for (new, &old) in keep.iter().enumerate() {
            newpos[old] = new;
        }
        let mut trip = Vec::new();
        for (new_r, &old_r) in keep.iter().enumerate() {
            for k in self.indptr[old_r]..self.indptr[old_r + 1] {
                let c = newpos[self.indices[k]];
                if c != usize::MAX {
                    trip.push((new_r, c, self.data[k]));
                }
            }
        }
        Csr::from_triplets(keep.len(), keep.len(), trip)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out[[r, self.indices[k]]] += self.data[k];
            }
        }
        out
    }

    /// Iterate entries as (row, col, value) in row-major order.
    pub fn triplet_iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn identity(n: usize) -> Csr {
        Csr::from_triplets(
            n,
            n,
            (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect(),
        )
    }
}

/// Report from the conjugate-gradient solver.
#[derive(Debug, Clone, Copy)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for an operator that is Hermitian positive definite
/// with respect to the weighted product `⟨·,·⟩_w`.
///
/// `apply` computes `y = A x`; the iteration runs until
/// `‖r‖_w ≤ tol ‖b‖_w` or `max_iter` is exhausted (the latter is an error).
pub fn cg_w<F>(
    mut apply: F,
    b: &[C64],
    x: &mut [C64],
    w: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgReport>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let mut r = vec![C64::new(0.0, 0.0); n];
    let mut ap = vec![C64::new(0.0, 0.0); n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = norm_w(w, b).max(1e-300);
    let mut rr = dot_w(w, &r, &r).re;
    if rr.sqrt() <= tol * bnorm {
        return Ok(CgReport {
            iterations: 0,
            relative_residual: rr.sqrt() / bnorm,
        });
    }
    let mut p = r.clone();
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot_w(w, &p, &ap).re;
        if pap <= 0.0 {
            return Err(Error::Invariant(
                "cg_w: operator not positive definite in the weighted product".into(),
            ));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot_w(w, &r, &r).re;
        if rr_new.sqrt() <= tol * bnorm {
            return Ok(CgReport {
                iterations: it,
                relative_residual: rr_new.sqrt() / bnorm,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::SolverStalled {
        solver: "cg_w",
        relres: rr.sqrt() / bnorm,
        iters: max_iter,
    })
}

/// Result of the weighted Hermitian eigensolve.
pub struct EighW {
    /// Ascending real eigenvalues.
    pub omegas: Vec<f64>,
    /// Eigenvectors as columns, orthonormal in `⟨·,·⟩_w`.
    pub vecs: Array2<C64>,
    /// Max-entry Hermiticity defect of the similarity-transformed matrix,
    /// relative to its largest entry (diagnostic; the transform is
    /// symmetrized before calling LAPACK).
    pub herm_defect: f64,
}

/// Eigendecomposition of an operator `A` that is Hermitian with respect to
/// the weighted product `⟨·,·⟩_w` with `w > 0`.
///
/// Internally solves the ordinary Hermitian problem for
/// `Â = W^{1/2} A W^{-1/2}` and maps eigenvectors back by `W^{-1/2}`, which
/// keeps them exactly w-orthonormal (up to LAPACK roundoff).
pub fn eigh_w(a: &Array2<C64>, w: &[f64]) -> Result<EighW> {
    let n = a.nrows();
    if a.ncols() != n || w.len() != n {
        return Err(Error::InvalidParameter("eigh_w: shape mismatch".into()));
    }
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter(
            "eigh_w: weights must be strictly positive".into(),
        ));
    }
    let d: Vec<f64> = w.iter().map(|&x| x.sqrt()).collect();
    let mut b = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            b[[i, j]] = a[[i, j]] * (d[i] / d[j]);
        }
    }
    let scale = max_abs(&b).max(1e-300);
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let asym = (b[[i, j]] - b[[j, i]].conj()).norm();
            defect = defect.max(asym / scale);
        }
    }
    let bh = herm_part(&b);
    let (vals, vecs) = bh.eigh(UPLO::Lower)?;
    // LAPACK receives the row-major array as its conjugate transpose, so the
    // returned columns are conjugated eigenvectors; undo that here.
    let mut out = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            out[[i, j]] = vecs[[i, j]].conj() / d[i];
        }
    }
    Ok(EighW {
        omegas: vals.to_vec(),
        vecs: out,
        herm_defect: defect,
    })
}

/// Dense Hermitian eigensolve convenience: ascending values + column vectors.
pub fn eigh_plain(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let (vals, vecs) = herm_part(a).eigh(UPLO::Lower)?;
    Ok((vals.to_vec(), vecs.mapv(|z| z.conj())))
}

/// Dense matrix exponential by scaling and squaring of a truncated Taylor
/// series. Accurate to ~1e−13 relative at the matrix sizes used here; serves
/// as the independent propagation oracle for the spectral and evolution
/// solvers.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidParameter("expm: matrix must be square".into()));
    }
    // 1-norm (max column sum) sets the scaling power.
    let mut nrm = 0.0f64;
    for j in 0..n {
        let col: f64 = (0..n).map(|i| a[[i, j]].norm()).sum();
        nrm = nrm.max(col);
    }
    let s = if nrm > 0.5 {
        (nrm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a.mapv(|z| z / 2f64.powi(s as i32));
    let mut sum = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=24 {
        term = term.dot(&b).mapv(|z| z / k as f64);
        sum += &term;
        if max_abs(&term) < 1e-18 * max_abs(&sum).max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.dot(&sum);
    }
    Ok(sum)
}

/// Convert a flat slice into an `Array1` view-copy (helper for LAPACK calls).
pub fn to_array1(x: &[C64]) -> Array1<C64> {
    Array1::from(x.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn small_inverse_and_det_match_hand_values() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let (inv, det) = inv_det_small(&a).unwrap();
        assert!((det - 5.0).abs() < 1e-14);
        let id = a.dot(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[[i, j]] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn small_inverse_rejects_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(inv_det_small(&a).is_err());
    }

    #[test]
    fn complex_det_matches_cofactor_expansion() {
        let a = array![
            [c(1.0, 1.0), c(2.0, 0.0)],
            [c(0.0, 3.0), c(1.0, -1.0)]
        ];
        // det = (1+i)(1-i) - 2*(3i) = 2 - 6i
        let d = cdet(&a);
        assert!((d - c(2.0, -6.0)).norm() < 1e-14);
    }

    #[test]
    fn csr_roundtrip_sums_duplicates_and_applies() {
        let t = vec![
            (0, 0, c(1.0, 0.0)),
            (0, 0, c(1.0, 0.0)),
            (0, 2, c(0.0, 1.0)),
            (2, 1, c(-1.0, 0.0)),
        ];
        let a = Csr::from_triplets(3, 3, t);
        assert_eq!(a.nnz(), 3);
        let x = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let y = a.apply_alloc(&x);
        assert!((y[0] - c(2.0, 3.0)).norm() < 1e-15);
        assert!(y[1].norm() == 0.0);
        assert!((y[2] - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn weighted_adjoint_is_adjoint_for_weighted_product() {
        let mut rng = seeded_rng(7);
        let n = 12;
        let mut trip = Vec::new();
        for _ in 0..40 {
            let r = rng.random_range(0..n);
            let cidx = rng.random_range(0..n);
            trip.push((r, cidx, c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
        }
        let a = Csr::from_triplets(n, n, trip);
        let w: Vec<f64> = (0..n).map(|i| 0.3 + i as f64 * 0.1).collect();
        let aw = a.adjoint_w(&w);
        let u = random_cvec(&mut rng, n);
        let v = random_cvec(&mut rng, n);
        let lhs = dot_w(&w, &u, &a.apply_alloc(&v));
        let rhs = dot_w(&w, &aw.apply_alloc(&u), &v);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn restriction_keeps_selected_block() {
        let t = vec![
            (0, 0, c(1.0, 0.0)),
            (0, 3, c(2.0, 0.0)),
            (3, 0, c(4.0, 0.0)),
            (3, 3, c(5.0, 0.0)),
            (1, 1, c(9.0, 0.0)),
        ];
        let a = Csr::from_triplets(4, 4, t);
        let s = a.restrict(&[0, 3]);
        let d = s.to_dense();
        assert!((d[[0, 0]] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((d[[0, 1]] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((d[[1, 0]] - c(4.0, 0.0)).norm() < 1e-15);
        assert!((d[[1, 1]] - c(5.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cg_solves_weighted_spd_system() {
        let n = 30;
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.05 * i as f64).collect();
        // A = I + L†_w L with a simple difference operator L is w-Hermitian PD.
        let mut trip = Vec::new();
        for i in 0..n - 1 {
            trip.push((i, i, c(1.0, 0.0)));
            trip.push((i, i + 1, c(-1.0, 0.2)));
        }
        trip.push((n - 1, n - 1, c(1.0, 0.0)));
        let l = Csr::from_triplets(n, n, trip);
        let lw = l.adjoint_w(&w);
        let mut rng = seeded_rng(3);
        let b = random_cvec(&mut rng, n);
        let mut x = vec![c(0.0, 0.0); n];
        let mut tmp = vec![c(0.0, 0.0); n];
        let report = cg_w(
            |v, y| {
                l.apply(v, &mut tmp);
                lw.apply(&tmp, y);
                for i in 0..n {
                    y[i] += v[i];
                }
            },
            &b,
            &mut x,
            &w,
            1e-13,
            500,
        )
        .unwrap();
        assert!(report.relative_residual <= 1e-13);
        // verify residual independently
        let mut ax = vec![c(0.0, 0.0); n];
        l.apply(&x, &mut tmp);
        lw.apply(&tmp, &mut ax);
        for i in 0..n {
            ax[i] += x[i];
        }
        let res: Vec<C64> = (0..n).map(|i| b[i] - ax[i]).collect();
        assert!(norm_w(&w, &res) <= 1e-12 * norm_w(&w, &b));
    }

    #[test]
    fn eigh_w_reconstructs_and_is_w_orthonormal() {
        let mut rng = seeded_rng(11);
        let n = 8;
        let w: Vec<f64> = (0..n).map(|i| 0.5 + 0.2 * i as f64).collect();
        // Build a w-Hermitian A = W^{-1/2} B W^{1/2} from Hermitian B.
        let mut braw = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                braw[[i, j]] = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let bh = herm_part(&braw);
        let mut a = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = bh[[i, j]] * (w[j].sqrt() / w[i].sqrt());
            }
        }
        let sol = eigh_w(&a, &w).unwrap();
        assert!(sol.herm_defect < 1e-13);
        // w-orthonormality of columns
        for p in 0..n {
            for q in 0..n {
                let vp: Vec<C64> = sol.vecs.column(p).to_vec();
                let vq: Vec<C64> = sol.vecs.column(q).to_vec();
                let g = dot_w(&w, &vp, &vq);
                let want = if p == q { 1.0 } else { 0.0 };
                assert!(
                    (g - c(want, 0.0)).norm() < 1e-12,
                    "gram defect at ({p},{q}): {g}"
                );
            }
        }
        // A v = ω v
        for q in 0..n {
            let vq: Vec<C64> = sol.vecs.column(q).to_vec();
            let av = a.dot(&to_array1(&vq));
            for i in 0..n {
                assert!((av[i] - sol.omegas[q] * vq[i]).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn expm_matches_closed_forms() {
        // Rotation generator: exp([[0,−θ],[θ,0]]) = [[cos,−sin],[sin,cos]].
        let th = 0.7f64;
        let g = array![[c(0.0, 0.0), c(-th, 0.0)], [c(th, 0.0), c(0.0, 0.0)]];
        let e = expm(&g).unwrap();
        let want = [
            [th.cos(), -th.sin()],
            [th.sin(), th.cos()],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((e[[i, j]] - c(want[i][j], 0.0)).norm() < 1e-14);
            }
        }
        // Diagonal with large norm exercises the scaling path.
        let d = array![[c(0.0, 40.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-3.0, 0.0)]];
        let e = expm(&d).unwrap();
        assert!((e[[0, 0]] - c(40.0f64.cos(), 40.0f64.sin())).norm() < 1e-12);
        assert!((e[[1, 1]] - c((-3.0f64).exp(), 0.0)).norm() < 1e-14);
        assert!(e[[0, 1]].norm() < 1e-15 && e[[1, 0]].norm() < 1e-15);
    }
}
