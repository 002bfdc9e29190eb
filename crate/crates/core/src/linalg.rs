//! Thin SVD through the symmetric eigendecomposition of the smaller Gram
//! matrix.
//!
//! nalgebra's Golub–Kahan SVD can return singular vectors that do not
//! reconstruct the input when the matrix is rank-deficient, which column
//! centring always makes it. Its symmetric eigensolver does not have this
//! problem. Squaring the matrix costs relative accuracy only in the trailing
//! singular values, which no caller uses.

use nalgebra::{DMatrix, DVector};

/// `m ≈ u · diag(singular_values) · v_t`, singular values descending.
///
/// `u` is r × k and `v_t` is k × c with k = min(r, c). Vectors of the
/// smaller side are orthonormal. Vectors of the larger side are recovered by
/// projection, and are zero for singular values that vanish numerically.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let wide = m.nrows() <= m.ncols();
    // Work with a matrix `a` whose rows are the short side.
    let a = if wide { m.clone() } else { m.transpose() };
    let eig = (&a * a.transpose()).symmetric_eigen();
    let k = a.nrows();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let s = DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()));
    let left = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);

    let cutoff = s.max() * f64::EPSILON.sqrt() * k as f64;
    let mut right_t = &left.transpose() * &a;
    for i in 0..k {
        let scale = if s[i] > cutoff { 1.0 / s[i] } else { 0.0 };
        right_t.row_mut(i).scale_mut(scale);
    }

    if wide {
        ThinSvd { u: left, singular_values: s, v_t: right_t }
    } else {
        ThinSvd { u: right_t.transpose(), singular_values: s, v_t: left.transpose() }
    }
}
