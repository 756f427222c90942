//! Thin wrappers around nalgebra's dense decompositions for ndarray types.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};

pub(crate) fn to_nalgebra(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending,
/// eigenvectors as the corresponding columns. Ties keep nalgebra's order,
/// which is deterministic for identical input.
pub(crate) fn sym_eigen_desc(s: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = s.nrows();
    debug_assert_eq!(n, s.ncols());
    let eig = to_nalgebra(s).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, dst]] = eig.eigenvectors[(i, src)];
        }
    }
    (values, vectors)
}

/// Singular values of a dense rectangular matrix, descending.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}
