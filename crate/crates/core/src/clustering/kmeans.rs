use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distance::squared_euclidean;
use super::partition::HardPartition;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indices, Execution};

pub const DEFAULT_SEED: u64 = 20100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub execution: Execution,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        KMeansConfig {
            k,
            restarts: 50,
            seed: DEFAULT_SEED,
            max_iter: 300,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub partition: HardPartition,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares of the returned solution.
    pub wss: f64,
    pub iterations: usize,
    pub best_restart: usize,
    /// WSS reached by every restart, in restart order.
    pub restart_wss: Vec<f64>,
}

/// One Lloyd run from given initial centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wss: f64,
    pub iterations: usize,
    /// Objective after each assignment step.
    pub wss_trace: Vec<f64>,
}

pub(crate) fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn distinct_rows(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted.dedup();
    sorted.len()
}

/// k-means++ seeding: first centre uniform, then D²-weighted draws.
pub fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centres = vec![points[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| squared_euclidean(p, &centres[0]))
        .collect();
    while centres.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    chosen = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            chosen.expect("positive mass")
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_euclidean(p, &c));
        }
        centres.push(c);
    }
    centres
}

fn nearest_centre(p: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (g, c) in centres.iter().enumerate() {
        let d = squared_euclidean(p, c);
        if d < best.1 {
            best = (g, d);
        }
    }
    best
}

fn mean_of(points: &[Vec<f64>], labels: &[usize], g: usize, dim: usize) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    for (p, _) in points.iter().zip(labels).filter(|(_, &l)| l == g) {
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
        count += 1;
    }
    (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
}

/// Lloyd iterations until assignments stop changing. An emptied cluster is
/// reseeded with the point farthest from its current centroid.
pub fn lloyd(points: &[Vec<f64>], initial: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let k = initial.len();
    let dim = points.first().map_or(0, Vec::len);
    let mut centres = initial;
    let mut labels: Vec<usize> = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let assigned: Vec<(usize, f64)> = points.iter().map(|p| nearest_centre(p, &centres)).collect();
        let mut new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();

        // Empty-cluster repair.
        loop {
            let mut sizes = vec![0usize; k];
            for &l in &new_labels {
                sizes[l] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let far = (0..points.len())
                .filter(|&i| sizes[new_labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("some cluster has two points");
            new_labels[far] = empty;
            dist[far] = 0.0;
            centres[empty] = points[far].clone();
        }

        trace.push(dist.iter().sum());
        let changed = new_labels != labels;
        labels = new_labels;
        for (g, c) in centres.iter_mut().enumerate() {
            if let Some(m) = mean_of(points, &labels, g, dim) {
                *c = m;
            }
        }
        if !changed || iterations >= max_iter {
            break;
        }
    }
    let wss = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| squared_euclidean(p, &centres[l]))
        .sum();
    trace.push(wss);
    LloydRun {
        labels,
        centroids: centres,
        wss,
        iterations,
        wss_trace: trace,
    }
}

/// Best-of-restarts k-means on the rows of `x`. Restart `r` is seeded with
/// `derive_seed(seed, r)`; the winner is the lowest WSS, ties to the lower
/// restart index, so the result is independent of scheduling.
pub fn kmeans(x: &DMatrix<f64>, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let points = rows_of(x);
    let n = points.len();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::domain(format!("k = {} outside 1..={n}", cfg.k)));
    }
    if cfg.restarts == 0 {
        return Err(Error::domain("restarts must be at least 1"));
    }
    let distinct = distinct_rows(&points);
    if distinct < cfg.k {
        return Err(Error::ReducedK { distinct, k: cfg.k });
    }

    let runs = map_indices(cfg.execution, cfg.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, r as u64));
        let init = kmeans_plus_plus(&points, cfg.k, &mut rng);
        lloyd(&points, init, cfg.max_iter)
    });
    let restart_wss: Vec<f64> = runs.iter().map(|r| r.wss).collect();
    let (best_restart, _) = restart_wss
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    let best = runs.into_iter().nth(best_restart).expect("index in range");

    let partition = HardPartition::from_labels(&best.labels);
    // Reorder centroids to match the first-occurrence labels.
    let mut centroids = vec![Vec::new(); cfg.k];
    for (raw, &canon) in best.labels.iter().zip(partition.labels()) {
        if centroids[canon].is_empty() {
            centroids[canon] = best.centroids[*raw].clone();
        }
    }
    Ok(KMeansResult {
        partition,
        centroids,
        wss: best.wss,
        iterations: best.iterations,
        best_restart,
        restart_wss,
    })
}
