use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::thin_svd;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Entities × components.
    pub scores: DMatrix<f64>,
    /// Variables × components, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// Variance share of each retained component.
    pub explained_ratio: Vec<f64>,
    /// Variance share of every component of the decomposition.
    pub full_explained_ratio: Vec<f64>,
    pub singular_values: Vec<f64>,
}

impl PcaResult {
    pub fn cumulative_explained(&self) -> f64 {
        self.explained_ratio.iter().sum()
    }
}

/// PCA by thin SVD of an already centred (usually standardized) matrix.
///
/// Each component's sign is chosen so that its largest-magnitude loading is
/// positive.
pub fn pca(m: &DMatrix<f64>, n_components: usize) -> Result<PcaResult> {
    let (n, p) = m.shape();
    let max = n.saturating_sub(1).min(p);
    if n_components == 0 || n_components > max {
        return Err(Error::domain(format!(
            "n_components = {n_components} outside 1..={max}"
        )));
    }
    let svd = thin_svd(m);
    let (u, v_t) = (svd.u, svd.v_t);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(Error::domain("PCA input has zero variance"));
    }
    let full: Vec<f64> = sv.iter().map(|s| s * s / total).collect();

    let mut loadings = DMatrix::zeros(p, n_components);
    let mut scores = DMatrix::zeros(n, n_components);
    for c in 0..n_components {
        let row = v_t.row(c);
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            loadings[(j, c)] = sign * row[j];
        }
        for i in 0..n {
            scores[(i, c)] = sign * u[(i, c)] * sv[c];
        }
    }
    Ok(PcaResult {
        scores,
        loadings,
        explained_ratio: full[..n_components].to_vec(),
        full_explained_ratio: full,
        singular_values: sv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::standardize_columns;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))
    }

    fn centre(m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        out
    }

    #[test]
    fn points_on_a_line() {
        let dir = [1.0, -2.0, 0.5];
        let m = DMatrix::from_fn(8, 3, |i, j| (i as f64 - 3.5) * dir[j]);
        let r = pca(&m, 1).unwrap();
        assert!((r.explained_ratio[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_preserves_spectrum() {
        let m = centre(&random_matrix(12, 4, 1));
        // Orthogonal Q from the QR of a random square matrix.
        let q = random_matrix(4, 4, 2).qr().q();
        let rotated = &m * &q;
        let a = pca(&m, 3).unwrap();
        let b = pca(&rotated, 3).unwrap();
        for (x, y) in a.full_explained_ratio.iter().zip(&b.full_explained_ratio) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn structural_invariants() {
        let m = standardize_columns(&random_matrix(10, 25, 3)).unwrap().matrix;
        let r = pca(&m, 9).unwrap();
        assert!(r.explained_ratio.windows(2).all(|w| w[0] >= w[1]));
        assert!((r.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let gram = r.loadings.transpose() * &r.loadings;
        assert!((gram - DMatrix::identity(9, 9)).amax() < 1e-10);
        assert!((&m * &r.loadings - &r.scores).amax() < 1e-10);
        for (c, col) in r.scores.column_iter().enumerate() {
            assert!(col.mean().abs() < 1e-10);
            let var = col.norm_squared() / 9.0;
            assert!((var - r.singular_values[c].powi(2) / 9.0).abs() < 1e-9);
        }
        let cov = r.scores.transpose() * &r.scores / 9.0;
        for i in 0..9 {
            for j in 0..9 {
                if i != j {
                    assert!(cov[(i, j)].abs() < 1e-9);
                }
            }
        }
        for col in r.loadings.column_iter() {
            let pivot = col.iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn component_count_bounds() {
        let m = centre(&random_matrix(5, 3, 4));
        assert!(pca(&m, 0).is_err());
        assert!(pca(&m, 4).is_err());
        assert!(pca(&m, 3).is_ok());
    }

    #[test]
    fn row_permutation_permutes_scores() {
        let m = random_matrix(9, 6, 5);
        let perm = [3usize, 0, 8, 1, 7, 2, 6, 4, 5];
        let permuted = DMatrix::from_fn(9, 6, |i, j| m[(perm[i], j)]);
        let a = pca(&standardize_columns(&m).unwrap().matrix, 4).unwrap();
        let b = pca(&standardize_columns(&permuted).unwrap().matrix, 4).unwrap();
        for i in 0..9 {
            for c in 0..4 {
                assert!((a.scores[(perm[i], c)] - b.scores[(i, c)]).abs() < 1e-9);
            }
        }
    }
}
