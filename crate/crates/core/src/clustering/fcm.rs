use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distance::squared_euclidean;
use super::kmeans::{kmeans_plus_plus, rows_of, DEFAULT_SEED};
use super::partition::FuzzyPartition;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indices, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    pub k: usize,
    /// Fuzziness exponent, > 1.
    pub m: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the largest membership change falls below this.
    pub tolerance: f64,
    pub execution: Execution,
}

impl FcmConfig {
    pub fn new(k: usize) -> Self {
        FcmConfig {
            k,
            m: 2.0,
            restarts: 20,
            seed: DEFAULT_SEED,
            max_iter: 500,
            tolerance: 1e-8,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmResult {
    pub partition: FuzzyPartition,
    pub centers: Vec<Vec<f64>>,
    /// Σ_i Σ_g u_ig^m ‖x_i − c_g‖².
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    pub restart_objective: Vec<f64>,
}

/// A single alternating-optimisation run with its per-iteration history.
#[derive(Debug, Clone, PartialEq)]
pub struct FcmRun {
    pub memberships: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    /// Largest |row sum − 1| seen across all iterations.
    pub max_row_sum_error: f64,
}

/// Memberships of one point given centres. A point on a centre gets full
/// membership there (shared equally among coincident centres).
fn memberships_for(p: &[f64], centers: &[Vec<f64>], m: f64) -> Vec<f64> {
    let d2: Vec<f64> = centers.iter().map(|c| squared_euclidean(p, c)).collect();
    let zeros = d2.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        let share = 1.0 / zeros as f64;
        return d2.iter().map(|&d| if d == 0.0 { share } else { 0.0 }).collect();
    }
    let exponent = 1.0 / (m - 1.0);
    let u: Vec<f64> = d2
        .iter()
        .map(|&dg| {
            let s: f64 = d2.iter().map(|&dh| (dg / dh).powf(exponent)).sum();
            1.0 / s
        })
        .collect();
    let total: f64 = u.iter().sum();
    u.into_iter().map(|v| v / total).collect()
}

fn centers_for(points: &[Vec<f64>], u: &[Vec<f64>], k: usize, m: f64) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    (0..k)
        .map(|g| {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (p, row) in points.iter().zip(u) {
                let w = row[g].powf(m);
                den += w;
                for (a, v) in num.iter_mut().zip(p) {
                    *a += w * v;
                }
            }
            num.into_iter().map(|a| a / den).collect()
        })
        .collect()
}

pub fn fcm_objective(points: &[Vec<f64>], u: &[Vec<f64>], centers: &[Vec<f64>], m: f64) -> f64 {
    points
        .iter()
        .zip(u)
        .map(|(p, row)| {
            row.iter()
                .zip(centers)
                .map(|(w, c)| w.powf(m) * squared_euclidean(p, c))
                .sum::<f64>()
        })
        .sum()
}

/// Fuzzy c-means starting from memberships induced by `initial` centres.
pub fn fcm_from_centers(
    points: &[Vec<f64>],
    initial: Vec<Vec<f64>>,
    m: f64,
    max_iter: usize,
    tolerance: f64,
) -> FcmRun {
    let k = initial.len();
    let row_err = |u: &[Vec<f64>]| {
        u.iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    };
    let mut u: Vec<Vec<f64>> = points.iter().map(|p| memberships_for(p, &initial, m)).collect();
    let mut centers = initial;
    let mut max_row_sum_error = row_err(&u);
    let mut trace = vec![fcm_objective(points, &u, &centers, m)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        centers = centers_for(points, &u, k, m);
        let next: Vec<Vec<f64>> = points.iter().map(|p| memberships_for(p, &centers, m)).collect();
        let delta = u
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = next;
        max_row_sum_error = max_row_sum_error.max(row_err(&u));
        trace.push(fcm_objective(points, &u, &centers, m));
        if delta < tolerance {
            converged = true;
            break;
        }
    }
    let objective = fcm_objective(points, &u, &centers, m);
    FcmRun {
        memberships: u,
        centers,
        objective,
        iterations,
        converged,
        objective_trace: trace,
        max_row_sum_error,
    }
}

/// Best-of-restarts fuzzy c-means on the rows of `x`, each restart seeded
/// by k-means++ centres.
pub fn fuzzy_cmeans(x: &DMatrix<f64>, cfg: &FcmConfig) -> Result<FcmResult> {
    let points = rows_of(x);
    let n = points.len();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::domain(format!("k = {} outside 1..={n}", cfg.k)));
    }
    if !(cfg.m > 1.0) {
        return Err(Error::domain(format!("fuzziness m = {} must exceed 1", cfg.m)));
    }
    if cfg.restarts == 0 {
        return Err(Error::domain("restarts must be at least 1"));
    }
    let runs = map_indices(cfg.execution, cfg.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, r as u64));
        let init = kmeans_plus_plus(&points, cfg.k, &mut rng);
        fcm_from_centers(&points, init, cfg.m, cfg.max_iter, cfg.tolerance)
    });
    let restart_objective: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    let (best_restart, _) = restart_objective
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    let best = runs.into_iter().nth(best_restart).expect("index in range");
    if !best.converged {
        log::warn!(
            "fuzzy c-means did not converge in {} iterations (k = {})",
            cfg.max_iter,
            cfg.k
        );
    }
    let flat: Vec<f64> = best.memberships.into_iter().flatten().collect();
    Ok(FcmResult {
        partition: FuzzyPartition::new(flat, n, cfg.k, cfg.m)?,
        centers: best.centers,
        objective: best.objective,
        iterations: best.iterations,
        converged: best.converged,
        best_restart,
        restart_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::harden;

    fn two_clouds() -> DMatrix<f64> {
        let offsets = [(0.05, -0.03), (-0.08, 0.02), (0.01, 0.09), (-0.04, -0.07), (0.0, 0.0)];
        let mut rows = Vec::new();
        for centre in [0.0, 50.0] {
            for (dx, dy) in offsets {
                rows.extend([centre + dx, centre + dy]);
            }
        }
        DMatrix::from_row_slice(10, 2, &rows)
    }

    #[test]
    fn far_clouds_are_nearly_crisp() {
        let r = fuzzy_cmeans(&two_clouds(), &FcmConfig::new(2)).unwrap();
        for i in 0..10 {
            let max = r.partition.row(i).iter().copied().fold(0.0, f64::max);
            assert!(max > 0.99, "row {i}: {:?}", r.partition.row(i));
        }
        let hard = harden(&r.partition);
        assert!(hard.same_grouping(
            &crate::clustering::HardPartition::from_labels(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1])
        ));
        assert!(r.converged);
    }

    #[test]
    fn one_cluster_is_exact() {
        let r = fuzzy_cmeans(&two_clouds(), &FcmConfig::new(1)).unwrap();
        assert!(r.partition.as_slice().iter().all(|&u| u == 1.0));
    }

    #[test]
    fn coincident_point_gets_full_membership() {
        let u = memberships_for(&[1.0, 2.0], &[vec![1.0, 2.0], vec![5.0, 5.0]], 2.0);
        assert_eq!(u, vec![1.0, 0.0]);
    }

    #[test]
    fn objective_monotone_and_rows_stochastic() {
        let x = DMatrix::from_fn(30, 3, |i, j| ((i * 13 + j * 5) as f64 * 0.29).sin() * (1 + i % 4) as f64);
        let points = rows_of(&x);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = kmeans_plus_plus(&points, 4, &mut rng);
            let run = fcm_from_centers(&points, init, 2.0, 500, 1e-8);
            for w in run.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
            assert!(run.max_row_sum_error < 1e-9);
        }
    }

    #[test]
    fn invalid_config() {
        let mut cfg = FcmConfig::new(2);
        cfg.m = 1.0;
        assert!(fuzzy_cmeans(&two_clouds(), &cfg).is_err());
        assert!(fuzzy_cmeans(&two_clouds(), &FcmConfig::new(11)).is_err());
    }
}
