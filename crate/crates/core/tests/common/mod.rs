//! Reference implementations used only by tests: adjusted Rand index and
//! brute-force validity indices written from their textbook definitions.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// Adjusted Rand index (Hubert and Arabie) from the contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let c2 = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sa: f64 = rows.values().map(|&v| c2(v)).sum();
    let sb: f64 = cols.values().map(|&v| c2(v)).sum();
    let expected = sa * sb / c2(n);
    let max = (sa + sb) / 2.0;
    if (max - expected).abs() < 1e-15 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

fn dist(x: &[Vec<f64>], i: usize, j: usize) -> f64 {
    x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn clusters(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        out.entry(l).or_default().push(i);
    }
    out
}

/// Per-point silhouette widths on Euclidean distances; singletons score 0.
pub fn silhouette_widths(x: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
    let groups = clusters(labels);
    (0..x.len())
        .map(|i| {
            let own = &groups[&labels[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let a = own.iter().filter(|&&j| j != i).map(|&j| dist(x, i, j)).sum::<f64>()
                / (own.len() - 1) as f64;
            let b = groups
                .iter()
                .filter(|(g, _)| **g != labels[i])
                .map(|(_, m)| m.iter().map(|&j| dist(x, i, j)).sum::<f64>() / m.len() as f64)
                .fold(f64::INFINITY, f64::min);
            (b - a) / a.max(b)
        })
        .collect()
}

pub fn silhouette(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    let w = silhouette_widths(x, labels);
    w.iter().sum::<f64>() / w.len() as f64
}

/// Point-biserial correlation via the group-mean formula
/// `(M1 − M0) / s · sqrt(n1 n0 / N²)` with population `s`.
pub fn point_biserial(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut within = Vec::new();
    let mut between = Vec::new();
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            if labels[i] == labels[j] {
                within.push(dist(x, i, j));
            } else {
                between.push(dist(x, i, j));
            }
        }
    }
    let all: Vec<f64> = within.iter().chain(&between).copied().collect();
    let nt = all.len() as f64;
    let mean = all.iter().sum::<f64>() / nt;
    let s = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nt).sqrt();
    let m1 = between.iter().sum::<f64>() / between.len() as f64;
    let m0 = within.iter().sum::<f64>() / within.len() as f64;
    (m1 - m0) / s * (between.len() as f64 * within.len() as f64 / (nt * nt)).sqrt()
}

pub fn partition_coefficient(u: &[Vec<f64>]) -> f64 {
    u.iter().flatten().map(|v| v * v).sum::<f64>() / u.len() as f64
}

pub fn xie_beni(x: &[Vec<f64>], u: &[Vec<f64>], centers: &[Vec<f64>], m: f64) -> f64 {
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let mut num = 0.0;
    for (i, row) in u.iter().enumerate() {
        for (g, c) in centers.iter().enumerate() {
            num += row[g].powf(m) * sq(&x[i], c);
        }
    }
    let mut sep = f64::INFINITY;
    for g in 0..centers.len() {
        for h in 0..centers.len() {
            if g != h {
                sep = sep.min(sq(&centers[g], &centers[h]));
            }
        }
    }
    num / (x.len() as f64 * sep)
}

/// Fuzzy silhouette: crisp widths of the argmax partition weighted by the
/// gap between the two largest memberships raised to `alpha`.
pub fn fuzzy_silhouette(x: &[Vec<f64>], u: &[Vec<f64>], alpha: f64) -> f64 {
    let labels: Vec<usize> = u
        .iter()
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().position(|&v| v == best).unwrap()
        })
        .collect();
    let s = silhouette_widths(x, &labels);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, row) in u.iter().enumerate() {
        let mut sorted = row.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let w = (sorted[0] - sorted[1]).powf(alpha);
        num += w * s[i];
        den += w;
    }
    num / den
}

/// Minimum within-cluster sum of squares over every 2-partition.
pub fn best_two_partition(x: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = x.len();
    let mut best = (Vec::new(), f64::INFINITY);
    // Fixing point 0 in cluster 0 enumerates each split once.
    for mask in 1u64..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize }).collect();
        let w = wss(x, &labels);
        if w < best.1 {
            best = (labels, w);
        }
    }
    best
}

pub fn wss(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    clusters(labels)
        .values()
        .map(|m| {
            let d = x[0].len();
            let c: Vec<f64> = (0..d).map(|j| m.iter().map(|&i| x[i][j]).sum::<f64>() / m.len() as f64).collect();
            m.iter().map(|&i| x[i].iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum::<f64>()
        })
        .sum()
}
