//! Dimension reduction and smoothing of per-country feature vectors.

mod pca;
mod spline;

pub use pca::{pca, PcaResult};
pub use spline::{fit_bspline, BSplineBasis, SplineFit};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub matrix: DMatrix<f64>,
    pub means: Vec<f64>,
    /// Sample standard deviations (divisor n − 1).
    pub sds: Vec<f64>,
}

/// Centre each column and divide by its sample standard deviation.
pub fn standardize_columns(m: &DMatrix<f64>) -> Result<Standardized> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::domain("standardization needs at least two rows"));
    }
    let mut out = m.clone();
    let mut means = Vec::with_capacity(m.ncols());
    let mut sds = Vec::with_capacity(m.ncols());
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.mean();
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ZeroVariance { column: j });
        }
        col.apply(|v| *v = (*v - mean) / sd);
        means.push(mean);
        sds.push(sd);
    }
    Ok(Standardized {
        matrix: out,
        means,
        sds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_column() {
        let m = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let s = standardize_columns(&m).unwrap();
        assert_eq!(s.matrix.as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(s.means, vec![2.0]);
        assert_eq!(s.sds, vec![1.0]);
    }

    #[test]
    fn idempotent() {
        let m = DMatrix::from_fn(7, 4, |i, j| ((i * 13 + j * 7) as f64).sin() * (j + 1) as f64);
        let once = standardize_columns(&m).unwrap().matrix;
        let twice = standardize_columns(&once).unwrap().matrix;
        assert!((once.clone() - twice).amax() < 1e-12);
        for col in once.column_iter() {
            assert!(col.mean().abs() < 1e-12);
            assert!((col.variance() * 7.0 / 6.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_errors() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert!(matches!(
            standardize_columns(&m),
            Err(Error::ZeroVariance { column: 1 })
        ));
    }
}
