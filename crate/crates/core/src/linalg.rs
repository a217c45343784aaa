//! Dense decompositions, delegated to faer and converted back to nalgebra.

use faer::{Mat, Side};
use nalgebra::DMatrix;

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(s) Vᵀ`, singular values in decreasing order.
/// `None` if the iteration did not converge.
pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Some((DMatrix::zeros(rows, 0), Vec::new(), DMatrix::zeros(0, cols)));
    }
    let svd = to_faer(m).thin_svd().ok()?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let u = DMatrix::from_fn(rows, k, |i, j| u[(i, j)]);
    let v_t = DMatrix::from_fn(k, cols, |i, j| v[(j, i)]);
    let s = (0..k).map(|i| s[i]).collect();
    Some((u, s, v_t))
}

/// Eigen-decomposition of a symmetric matrix: `(λ, V)` with `m = V diag(λ) Vᵀ`.
/// Only the lower triangle is read.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Some((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let evd = to_faer(m).self_adjoint_eigen(Side::Lower).ok()?;
    let (s, u) = (evd.S(), evd.U());
    let values = (0..n).map(|i| s[i]).collect();
    Some((values, DMatrix::from_fn(n, n, |i, j| u[(i, j)])))
}
