use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::lifetable::IndexArray;

/// Symmetric pairwise dissimilarities with zero diagonal, stored as the
/// condensed upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    condensed: Vec<f64>,
}

#[inline]
fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceMatrix {
    /// Build from `f(i, j)` evaluated for `i < j`.
    pub fn from_fn<F>(ids: Vec<String>, exec: Execution, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let n = ids.len();
        let rows = map_indices(exec, n, |i| ((i + 1)..n).map(|j| f(i, j)).collect::<Vec<_>>());
        let condensed: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(bad) = condensed.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::domain(format!("invalid dissimilarity {bad}")));
        }
        Ok(DistanceMatrix { ids, condensed })
    }

    /// Euclidean distances between the rows of `x`.
    pub fn euclidean(ids: Vec<String>, x: &DMatrix<f64>) -> Result<Self> {
        if ids.len() != x.nrows() {
            return Err(Error::domain("ids and rows differ in length"));
        }
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        DistanceMatrix::from_fn(ids, Execution::Sequential, |i, j| {
            squared_euclidean(&rows[i], &rows[j]).sqrt()
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.condensed[condensed_index(self.len(), i, j)],
            std::cmp::Ordering::Greater => self.condensed[condensed_index(self.len(), j, i)],
        }
    }

    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    pub fn scaled(&self, factor: f64) -> DistanceMatrix {
        DistanceMatrix {
            ids: self.ids.clone(),
            condensed: self.condensed.iter().map(|d| d * factor).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Hellinger distance between two probability vectors.
pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    (0.5 * s).sqrt().min(1.0)
}

/// Time-averaged Hellinger distance between countries' normalised death
/// distributions: `D_ij = (1/T) Σ_t H(d*_it, d*_jt)`.
pub fn hellinger_distance_matrix(dstar: &IndexArray, exec: Execution) -> Result<DistanceMatrix> {
    let (nc, ny, _) = dstar.dims();
    for c in 0..nc {
        for t in 0..ny {
            let slice = dstar.slice(c, t);
            if let Some(v) = slice.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::domain(format!(
                    "negative death share {v} for {} {}",
                    dstar.countries[c], dstar.years[t]
                )));
            }
            let total: f64 = slice.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::domain(format!(
                    "death shares for {} {} sum to {total}",
                    dstar.countries[c], dstar.years[t]
                )));
            }
        }
    }
    let roots: Vec<f64> = dstar.values().iter().map(|v| v.sqrt()).collect();
    let na = dstar.ages.len();
    let slice = |c: usize, t: usize| &roots[(c * ny + t) * na..(c * ny + t + 1) * na];
    DistanceMatrix::from_fn(dstar.countries.clone(), exec, |i, j| {
        let total: f64 = (0..ny)
            .map(|t| {
                let s: f64 = slice(i, t)
                    .iter()
                    .zip(slice(j, t))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (0.5 * s).sqrt().min(1.0)
            })
            .sum();
        total / ny as f64
    })
}
