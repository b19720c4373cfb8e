//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Every rank decision in the crate goes through [`numerical_rank`], so the
//! relative threshold `σ > τ·σmax` is applied uniformly.

use nalgebra::{DMatrix, DVector};

/// Singular values and the matching right/left singular vectors, sorted by
/// descending singular value.
pub struct SortedSvd {
    pub values: Vec<f64>,
    /// Left singular vectors as columns (rows(a) × k).
    pub u: DMatrix<f64>,
    /// Right singular vectors as columns (cols(a) × cols(a) when the input
    /// was padded square, otherwise cols(a) × k).
    pub v: DMatrix<f64>,
}

/// SVD with columns of `u`/`v` reordered so singular values descend.
pub fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested u");
    let vt = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    SortedSvd { values, u, v }
}

/// Descending singular values of `a` (length `min(rows, cols)`).
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values strictly above `tau * max`. Zero when the
/// largest singular value is zero.
pub fn numerical_rank(singular_values: &[f64], tau: f64) -> usize {
    let smax = singular_values.iter().copied().fold(0.0_f64, f64::max);
    if smax <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > tau * smax).count()
}

/// Orthonormal basis (as columns) of the right null space `{v : a v = 0}`.
pub fn null_space(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad with zero rows so the SVD returns a full set of right vectors.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = sorted_svd(&padded);
    let rank = numerical_rank(&svd.values, tau);
    svd.v.columns(rank, cols - rank).into_owned()
}

/// Orthonormal basis of the left null space `{u : uᵀ a = 0}`.
pub fn left_null_space(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    null_space(&a.transpose(), tau)
}

/// Orthonormal basis of the column space of `a`.
pub fn range_basis(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = sorted_svd(a);
    let rank = numerical_rank(&svd.values, tau);
    svd.u.columns(0, rank).into_owned()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    sym.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves `h x = rhs` for symmetric positive definite `h`; `None` if the
/// Cholesky factorization fails.
pub fn spd_solve(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    h.clone().cholesky().map(|c| c.solve(rhs))
}

/// Orthogonal projector onto the span of the columns of `basis`.
pub fn projector(basis: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let q = range_basis(basis, tau);
    &q * q.transpose()
}

/// Spectral-norm distance between the orthogonal projectors onto two
/// subspaces of the same ambient space.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = projector(a, 1e-12) - projector(b, 1e-12);
    singular_values(&diff).first().copied().unwrap_or(0.0)
}

/// Relative symmetry defect `max |a_ij − a_ji| / max(1, max |a_ij|)`.
pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn dvec(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

/// Row-major nested vectors to a dense matrix. Returns `None` on ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| a.row(i).iter().copied().collect())
        .collect()
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}
