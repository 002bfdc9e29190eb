//! Internal cluster-validity indices for hard and fuzzy partitions, and
//! sweeps over the number of clusters.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clustering::{harden, squared_euclidean, DistanceMatrix, FuzzyPartition, HardPartition};
use crate::error::{Error, Result};
use crate::exec::{try_map_indices, Execution};

/// Per-entity silhouette widths. Entities alone in their cluster score 0.
pub fn silhouette_values(d: &DistanceMatrix, labels: &[usize]) -> Vec<f64> {
    let n = labels.len();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    (0..n)
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += d.get(i, j);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&g| g != own && sizes[g] > 0)
                .map(|g| sums[g] / sizes[g] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect()
}

/// Mean silhouette width.
pub fn silhouette(d: &DistanceMatrix, p: &HardPartition) -> Result<f64> {
    check_sizes(d.len(), p)?;
    if p.k() < 2 {
        return Err(Error::domain("silhouette needs at least two clusters"));
    }
    let s = silhouette_values(d, p.labels());
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

fn check_sizes(n: usize, p: &HardPartition) -> Result<()> {
    if p.len() != n {
        return Err(Error::domain(format!(
            "partition covers {} entities, data has {n}",
            p.len()
        )));
    }
    Ok(())
}

/// Calinski–Harabasz score; `within_zero` flags the `+∞` sentinel returned
/// when every point sits on its centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChScore {
    pub value: f64,
    pub within_zero: bool,
}

fn ch_from_traces(between: f64, within: f64, n: usize, k: usize) -> ChScore {
    if within <= 0.0 {
        return ChScore {
            value: f64::INFINITY,
            within_zero: true,
        };
    }
    ChScore {
        value: (between / (k - 1) as f64) / (within / (n - k) as f64),
        within_zero: false,
    }
}

fn check_ch(n: usize, p: &HardPartition) -> Result<()> {
    check_sizes(n, p)?;
    if p.k() < 2 || n <= p.k() {
        return Err(Error::domain(format!(
            "Calinski-Harabasz needs 2 <= k < n, got k = {}, n = {n}",
            p.k()
        )));
    }
    Ok(())
}

/// `[tr(B)/(k−1)] / [tr(W)/(n−k)]` on feature vectors.
pub fn calinski_harabasz(x: &DMatrix<f64>, p: &HardPartition) -> Result<ChScore> {
    let n = x.nrows();
    check_ch(n, p)?;
    let dim = x.ncols();
    let grand: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let mut centroids = vec![vec![0.0; dim]; p.k()];
    let sizes = p.sizes();
    for (i, &l) in p.labels().iter().enumerate() {
        for j in 0..dim {
            centroids[l][j] += x[(i, j)] / sizes[l] as f64;
        }
    }
    let within: f64 = p
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| (0..dim).map(|j| (x[(i, j)] - centroids[l][j]).powi(2)).sum::<f64>())
        .sum();
    let between: f64 = centroids
        .iter()
        .zip(&sizes)
        .map(|(c, &s)| s as f64 * squared_euclidean(c, &grand))
        .sum();
    Ok(ch_from_traces(between, within, n, p.k()))
}

/// Calinski–Harabasz from a dissimilarity matrix, treating squared
/// dissimilarities as squared Euclidean distances of an embedding.
pub fn calinski_harabasz_from_distances(d: &DistanceMatrix, p: &HardPartition) -> Result<ChScore> {
    let n = d.len();
    check_ch(n, p)?;
    let sizes = p.sizes();
    let mut total = 0.0;
    let mut within_pairs = vec![0.0; p.k()];
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = d.get(i, j).powi(2);
            total += d2;
            if p.labels()[i] == p.labels()[j] {
                within_pairs[p.labels()[i]] += d2;
            }
        }
    }
    let total_ss = total / n as f64;
    let within: f64 = within_pairs
        .iter()
        .zip(&sizes)
        .map(|(w, &s)| w / s as f64)
        .sum();
    Ok(ch_from_traces(total_ss - within, within, n, p.k()))
}

/// Pearson correlation between pairwise distances and the between-cluster
/// indicator (1 = different clusters).
pub fn point_biserial(d: &DistanceMatrix, p: &HardPartition) -> Result<f64> {
    let n = d.len();
    check_sizes(n, p)?;
    let mut dist = Vec::with_capacity(n * (n - 1) / 2);
    let mut ind = Vec::with_capacity(dist.capacity());
    for i in 0..n {
        for j in (i + 1)..n {
            dist.push(d.get(i, j));
            ind.push(if p.labels()[i] == p.labels()[j] { 0.0 } else { 1.0 });
        }
    }
    pearson(&dist, &ind)
        .ok_or_else(|| Error::UndefinedScore("point-biserial correlation has a zero-variance input".into()))
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.is_empty() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let scale = mx.abs().max(1.0);
    if sxx <= 1e-24 * scale * scale * n || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// `(1/n) Σ_i Σ_g u_ig²`.
pub fn partition_coefficient(f: &FuzzyPartition) -> f64 {
    f.as_slice().iter().map(|u| u * u).sum::<f64>() / f.n() as f64
}

/// Compactness over separation:
/// `Σ_i Σ_g u_ig^m ‖x_i − c_g‖² / (n · min_{g≠h} ‖c_g − c_h‖²)`.
pub fn xie_beni(x: &DMatrix<f64>, f: &FuzzyPartition, centers: &[Vec<f64>]) -> Result<f64> {
    let n = x.nrows();
    if f.n() != n || centers.len() != f.k() {
        return Err(Error::domain("Xie-Beni inputs disagree in shape"));
    }
    if f.k() < 2 {
        return Err(Error::domain("Xie-Beni needs at least two clusters"));
    }
    let m = f.fuzziness();
    let mut num = 0.0;
    for i in 0..n {
        let p: Vec<f64> = x.row(i).iter().copied().collect();
        for (g, c) in centers.iter().enumerate() {
            num += f.get(i, g).powf(m) * squared_euclidean(&p, c);
        }
    }
    let mut sep = f64::INFINITY;
    for g in 0..centers.len() {
        for h in (g + 1)..centers.len() {
            sep = sep.min(squared_euclidean(&centers[g], &centers[h]));
        }
    }
    if sep <= 0.0 {
        return Err(Error::UndefinedScore("Xie-Beni with coincident centres".into()));
    }
    Ok(num / (n as f64 * sep))
}

/// Membership-weighted mean of crisp silhouette widths, weights
/// `(u_first − u_second)^alpha`.
pub fn fuzzy_silhouette(d: &DistanceMatrix, f: &FuzzyPartition, alpha: f64) -> Result<f64> {
    if f.k() < 2 {
        return Err(Error::domain("fuzzy silhouette needs at least two clusters"));
    }
    if f.n() != d.len() {
        return Err(Error::domain("partition and distance matrix differ in size"));
    }
    let hard = harden(f);
    let s = silhouette_values(d, hard.labels());
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, si) in s.iter().enumerate() {
        let mut row = f.row(i).to_vec();
        row.sort_by(|a, b| b.total_cmp(a));
        let w = (row[0] - row[1]).powf(alpha);
        num += w * si;
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::UndefinedScore("every entity is tied between its top two clusters".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityIndex {
    Silhouette,
    CalinskiHarabasz,
    PointBiserial,
    PartitionCoefficient,
    FuzzySilhouette,
    XieBeni,
}

impl ValidityIndex {
    pub const HARD: [ValidityIndex; 3] = [
        ValidityIndex::Silhouette,
        ValidityIndex::CalinskiHarabasz,
        ValidityIndex::PointBiserial,
    ];
    pub const FUZZY: [ValidityIndex; 3] = [
        ValidityIndex::PartitionCoefficient,
        ValidityIndex::FuzzySilhouette,
        ValidityIndex::XieBeni,
    ];

    pub fn higher_is_better(self) -> bool {
        !matches!(self, ValidityIndex::XieBeni)
    }

    pub fn name(self) -> &'static str {
        match self {
            ValidityIndex::Silhouette => "silhouette",
            ValidityIndex::CalinskiHarabasz => "calinski_harabasz",
            ValidityIndex::PointBiserial => "point_biserial",
            ValidityIndex::PartitionCoefficient => "partition_coefficient",
            ValidityIndex::FuzzySilhouette => "fuzzy_silhouette",
            ValidityIndex::XieBeni => "xie_beni",
        }
    }
}

/// Index values of one clustering at a fixed k.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KEvaluation {
    pub scores: BTreeMap<ValidityIndex, f64>,
    /// Objective of the clustering (WSS for k-means, J_m for fuzzy c-means).
    pub objective: Option<f64>,
}

/// Something that can be clustered at a requested k and scored.
pub trait SweepTarget: Sync {
    fn n_entities(&self) -> usize;
    fn evaluate(&self, k: usize) -> Result<KEvaluation>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValiditySweep {
    pub k_values: Vec<usize>,
    pub scores: BTreeMap<ValidityIndex, Vec<f64>>,
    pub selected: BTreeMap<ValidityIndex, usize>,
    pub objective: Option<Vec<f64>>,
}

impl ValiditySweep {
    /// Long-format CSV: `k,index,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,index,value\n");
        for (idx, values) in &self.scores {
            for (k, v) in self.k_values.iter().zip(values) {
                let _ = writeln!(out, "{k},{},{v}", idx.name());
            }
        }
        if let Some(obj) = &self.objective {
            for (k, v) in self.k_values.iter().zip(obj) {
                let _ = writeln!(out, "{k},objective,{v}");
            }
        }
        out
    }
}

/// Evaluate `target` for every k in `k_min..=k_max` and record each index's
/// preferred k (first best on ties).
pub fn sweep(target: &dyn SweepTarget, k_min: usize, k_max: usize, exec: Execution) -> Result<ValiditySweep> {
    let n = target.n_entities();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(Error::domain(format!(
            "sweep range {k_min}..={k_max} invalid for {n} entities (need 2 <= kmin <= kmax <= n-1)"
        )));
    }
    let k_values: Vec<usize> = (k_min..=k_max).collect();
    let evals = try_map_indices(exec, k_values.len(), |i| target.evaluate(k_values[i]))?;

    let mut scores: BTreeMap<ValidityIndex, Vec<f64>> = BTreeMap::new();
    for e in &evals {
        for idx in e.scores.keys() {
            scores.entry(*idx).or_default();
        }
    }
    for (idx, values) in scores.iter_mut() {
        for e in &evals {
            values.push(*e.scores.get(idx).unwrap_or(&f64::NAN));
        }
    }
    let selected = scores
        .iter()
        .filter_map(|(idx, values)| {
            let mut best: Option<usize> = None;
            for (i, v) in values.iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) if idx.higher_is_better() => *v > values[b],
                    Some(b) => *v < values[b],
                };
                if better {
                    best = Some(i);
                }
            }
            best.map(|b| (*idx, k_values[b]))
        })
        .collect();
    let objective = evals
        .iter()
        .map(|e| e.objective)
        .collect::<Option<Vec<f64>>>();
    Ok(ValiditySweep {
        k_values,
        scores,
        selected,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{kmeans, KMeansConfig};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("e{i}")).collect()
    }

    fn six_points() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            6,
            2,
            &[0.0, 0.0, 0.3, 0.1, 0.1, 0.4, 10.0, 10.0, 10.2, 9.9, 9.7, 10.1],
        )
    }

    #[test]
    fn tight_far_clusters() {
        let x = six_points();
        let d = DistanceMatrix::euclidean(ids(6), &x).unwrap();
        let p = HardPartition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        assert!(silhouette(&d, &p).unwrap() > 0.9);
        assert!(point_biserial(&d, &p).unwrap() > 0.9);
        let mixed = HardPartition::new(vec![0, 1, 0, 1, 0, 1], 2).unwrap();
        let good = calinski_harabasz(&x, &p).unwrap().value;
        let bad = calinski_harabasz(&x, &mixed).unwrap().value;
        assert!(good > 100.0 * bad);
    }

    #[test]
    fn equidistant_points() {
        let d = DistanceMatrix::from_fn(ids(5), Execution::Sequential, |_, _| 1.0).unwrap();
        let p = HardPartition::new(vec![0, 0, 1, 1, 1], 2).unwrap();
        assert!(silhouette(&d, &p).unwrap().abs() < 1e-12);
        assert!(matches!(point_biserial(&d, &p), Err(Error::UndefinedScore(_))));
        let one = HardPartition::new(vec![0; 5], 1).unwrap();
        assert!(silhouette(&d, &one).is_err());
    }

    #[test]
    fn ch_edge_cases() {
        let x = six_points();
        let p = HardPartition::new(vec![0, 1, 2, 3, 4, 4], 5).unwrap();
        assert!(calinski_harabasz(&x, &p).unwrap().value.is_finite());
        let dup = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 1.0, 1.0]);
        let p = HardPartition::new(vec![0, 0, 1, 1], 2).unwrap();
        let s = calinski_harabasz(&dup, &p).unwrap();
        assert!(s.within_zero && s.value.is_infinite());
    }

    #[test]
    fn ch_distance_form_matches_features() {
        let x = six_points();
        let d = DistanceMatrix::euclidean(ids(6), &x).unwrap();
        for labels in [vec![0, 0, 0, 1, 1, 1], vec![0, 1, 0, 1, 2, 2]] {
            let p = HardPartition::from_labels(&labels);
            let a = calinski_harabasz(&x, &p).unwrap().value;
            let b = calinski_harabasz_from_distances(&d, &p).unwrap().value;
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn partition_coefficient_examples() {
        let crisp = FuzzyPartition::new(vec![1.0, 0.0, 0.0, 1.0], 2, 2, 2.0).unwrap();
        assert_eq!(partition_coefficient(&crisp), 1.0);
        let uniform = FuzzyPartition::new(vec![0.25; 8], 2, 4, 2.0).unwrap();
        assert_eq!(partition_coefficient(&uniform), 0.25);
        let mixed = FuzzyPartition::new(vec![0.5, 0.5, 1.0, 0.0], 2, 2, 2.0).unwrap();
        assert_eq!(partition_coefficient(&mixed), 0.75);
    }

    #[test]
    fn xie_beni_zero_and_scale() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 3.0, 3.0]);
        let f = FuzzyPartition::new(vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0], 4, 2, 2.0).unwrap();
        assert_eq!(xie_beni(&x, &f, &[vec![0.0], vec![3.0]]).unwrap(), 0.0);

        let f = FuzzyPartition::new(vec![0.9, 0.1, 0.7, 0.3, 0.2, 0.8, 0.4, 0.6], 4, 2, 2.0).unwrap();
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 1.0, 0.0, 4.0, 4.0, 5.0, 3.0]);
        let c = vec![vec![0.5, 0.5], vec![4.5, 3.5]];
        let a = xie_beni(&x, &f, &c).unwrap();
        let c2: Vec<Vec<f64>> = c.iter().map(|v| v.iter().map(|t| t * 2.0).collect()).collect();
        let b = xie_beni(&(x * 2.0), &f, &c2).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(xie_beni(&DMatrix::zeros(4, 2), &f, &[vec![1.0, 1.0], vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn fuzzy_silhouette_reduces_to_crisp() {
        let x = six_points();
        let d = DistanceMatrix::euclidean(ids(6), &x).unwrap();
        let p = HardPartition::new(vec![0, 0, 1, 1, 1, 0], 2).unwrap();
        let f = FuzzyPartition::from_hard(&p, 2.0);
        assert_eq!(fuzzy_silhouette(&d, &f, 1.0).unwrap(), silhouette(&d, &p).unwrap());
    }

    #[test]
    fn tied_entity_has_no_weight() {
        let x = six_points();
        let d = DistanceMatrix::euclidean(ids(6), &x).unwrap();
        let base = vec![0.9, 0.1, 0.8, 0.2, 0.5, 0.5, 0.1, 0.9, 0.2, 0.8, 0.3, 0.7];
        let mut moved = base.clone();
        // Changing which side the tied entity hardens to only matters via
        // other entities' silhouettes, so compare against a direct formula.
        moved[4] = 0.5;
        let f = FuzzyPartition::new(moved, 6, 2, 2.0).unwrap();
        let hard = harden(&f);
        let s = silhouette_values(&d, hard.labels());
        let w = [0.8, 0.6, 0.0, 0.8, 0.6, 0.4];
        let expected: f64 = s.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        assert!((fuzzy_silhouette(&d, &f, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    struct PointsTarget(DMatrix<f64>);

    impl SweepTarget for PointsTarget {
        fn n_entities(&self) -> usize {
            self.0.nrows()
        }
        fn evaluate(&self, k: usize) -> Result<KEvaluation> {
            let r = kmeans(&self.0, &KMeansConfig::new(k))?;
            let d = DistanceMatrix::euclidean(ids(self.0.nrows()), &self.0)?;
            let mut e = KEvaluation {
                objective: Some(r.wss),
                ..Default::default()
            };
            e.scores.insert(ValidityIndex::Silhouette, silhouette(&d, &r.partition)?);
            e.scores.insert(ValidityIndex::CalinskiHarabasz, calinski_harabasz(&self.0, &r.partition)?.value);
            e.scores.insert(ValidityIndex::PointBiserial, point_biserial(&d, &r.partition)?);
            Ok(e)
        }
    }

    #[test]
    fn planted_three_clusters_preferred() {
        let centres = [(0.0, 0.0), (20.0, 0.0), (10.0, 18.0)];
        let mut rows = Vec::new();
        for (g, (cx, cy)) in centres.iter().enumerate() {
            for i in 0..6 {
                let a = (i * 7 + g * 3) as f64;
                rows.extend([cx + 0.5 * a.sin(), cy + 0.5 * a.cos()]);
            }
        }
        let target = PointsTarget(DMatrix::from_row_slice(18, 2, &rows));
        let s = sweep(&target, 2, 6, Execution::default()).unwrap();
        for idx in ValidityIndex::HARD {
            assert_eq!(s.selected[&idx], 3, "{idx:?}: {:?}", s.scores[&idx]);
        }
        let obj = s.objective.as_ref().unwrap();
        assert!(obj.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.to_csv().starts_with("k,index,value\n2,silhouette,"));
        assert!(sweep(&target, 2, 18, Execution::default()).is_err());
        assert!(sweep(&target, 1, 4, Execution::default()).is_err());
    }
}
