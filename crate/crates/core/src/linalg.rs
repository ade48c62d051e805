//! Dense helpers on top of nalgebra's SVD: numerical rank, range and
//! null-space bases, and least squares.

use nalgebra::{DMatrix, DVector, SVD};

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `gap * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, gap: f64) -> usize {
    rank_of(&singular_values(m), gap)
}

pub(crate) fn rank_of(sv: &[f64], gap: f64) -> usize {
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > gap * smax).count(),
        _ => 0,
    }
}

/// Scales every nonzero column to unit Euclidean norm.
pub fn normalize_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    out
}

/// Orthonormal basis of the numerical column space (`gap` relative).
pub fn range_basis(m: &DMatrix<f64>, gap: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| smax > 0.0 && sv[i] > gap * smax).collect();
    let mut keep = keep;
    keep.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis of the numerical null space of `m` (columns), ordered by
/// ascending singular value.
pub fn null_space(m: &DMatrix<f64>, gap: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Zero-pad to at least square so the SVD returns a full set of right vectors.
    let padded_rows = rows.max(cols);
    let mut padded = DMatrix::zeros(padded_rows, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let mut idx: Vec<usize> = (0..sv.len()).filter(|&i| !(smax > 0.0 && sv[i] > gap * smax)).collect();
    idx.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]).then(a.cmp(&b)));
    DMatrix::from_fn(cols, idx.len(), |r, c| vt[(idx[c], r)])
}

/// Minimum-norm least-squares solution of `a x = b` and its residual norm.
/// Singular values below `1e-12 * sigma_max` are treated as zero.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), b.norm());
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let x = if smax > 0.0 {
        svd.solve(b, 1e-12 * smax).expect("U and V^T were computed")
    } else {
        DVector::zeros(a.ncols())
    };
    let r = (b - a * &x).norm();
    (x, r)
}

/// Orthonormal Q factor of a Gaussian matrix: a Haar-distributed frame.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix signs so the factorization is unique (diag(R) > 0).
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(numerical_rank(&m, 1e-10), 1);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.shape(), (3, 2));
        assert!((&m * &ns).norm() < 1e-12);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!((ns[(0, 0)] + ns[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn least_squares_exact_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, r) = least_squares(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn empty_matrix_has_rank_zero() {
        assert_eq!(numerical_rank(&DMatrix::zeros(4, 0), 1e-8), 0);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1e-8), 0);
    }
}
