use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Crisp assignment of `n` entities to `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HardPartition {
    labels: Vec<usize>,
    k: usize,
}

impl HardPartition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::domain(format!("label {l} out of range for k = {k}")));
            }
            sizes[l] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::domain(format!("cluster {g} is empty")));
        }
        Ok(HardPartition { labels, k })
    }

    /// Relabel arbitrary cluster ids so that clusters are numbered by the
    /// order of their first entity.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = raw
            .iter()
            .map(|&r| match map.iter().find(|(from, _)| *from == r) {
                Some(&(_, to)) => to,
                None => {
                    let to = map.len();
                    map.push((r, to));
                    to
                }
            })
            .collect();
        HardPartition {
            labels,
            k: map.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster)
            .collect()
    }

    /// Renumber clusters by the alphabetically first member name. Returns
    /// the relabelled partition and `order`, where `order[new] = old`.
    pub fn canonicalize(&self, names: &[String]) -> (HardPartition, Vec<usize>) {
        let mut first: Vec<(String, usize)> = (0..self.k)
            .map(|g| {
                let name = self
                    .members(g)
                    .into_iter()
                    .map(|i| names[i].clone())
                    .min()
                    .unwrap_or_default();
                (name, g)
            })
            .collect();
        first.sort();
        let order: Vec<usize> = first.into_iter().map(|(_, g)| g).collect();
        let mut inverse = vec![0; self.k];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let labels = self.labels.iter().map(|&l| inverse[l]).collect();
        (HardPartition { labels, k: self.k }, order)
    }

    /// True when both partitions group entities identically.
    pub fn same_grouping(&self, other: &HardPartition) -> bool {
        self.labels.len() == other.labels.len()
            && HardPartition::from_labels(&self.labels) == HardPartition::from_labels(&other.labels)
    }
}

/// Row-stochastic membership matrix (`n × k`) with its fuzziness exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    memberships: Vec<f64>,
    n: usize,
    k: usize,
    m: f64,
}

impl FuzzyPartition {
    pub fn new(memberships: Vec<f64>, n: usize, k: usize, m: f64) -> Result<Self> {
        if memberships.len() != n * k || k == 0 {
            return Err(Error::domain("membership matrix shape mismatch"));
        }
        for i in 0..n {
            let row = &memberships[i * k..(i + 1) * k];
            if row.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return Err(Error::domain(format!("membership row {i} outside [0,1]")));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("membership row {i} does not sum to 1")));
            }
        }
        Ok(FuzzyPartition { memberships, n, k, m })
    }

    /// Crisp memberships of a hard partition.
    pub fn from_hard(p: &HardPartition, m: f64) -> Self {
        let (n, k) = (p.len(), p.k());
        let mut memberships = vec![0.0; n * k];
        for (i, &l) in p.labels().iter().enumerate() {
            memberships[i * k + l] = 1.0;
        }
        FuzzyPartition { memberships, n, k, m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fuzziness(&self) -> f64 {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.memberships[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, g: usize) -> f64 {
        self.memberships[i * self.k + g]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.memberships
    }

    /// Reorder columns: new column `c` is old column `order[c]`.
    pub fn permute_clusters(&self, order: &[usize]) -> FuzzyPartition {
        let mut memberships = Vec::with_capacity(self.memberships.len());
        for i in 0..self.n {
            let row = self.row(i);
            memberships.extend(order.iter().map(|&g| row[g]));
        }
        FuzzyPartition {
            memberships,
            n: self.n,
            k: self.k,
            m: self.m,
        }
    }
}

/// Argmax membership per entity, ties toward the lower cluster index.
/// Clusters that win no entity are dropped and the rest renumbered in
/// index order.
pub fn harden(f: &FuzzyPartition) -> HardPartition {
    let raw: Vec<usize> = (0..f.n())
        .map(|i| {
            let row = f.row(i);
            let mut best = 0;
            for g in 1..row.len() {
                if row[g] > row[best] {
                    best = g;
                }
            }
            best
        })
        .collect();
    let mut used: Vec<usize> = raw.clone();
    used.sort_unstable();
    used.dedup();
    let labels = raw
        .iter()
        .map(|l| used.binary_search(l).expect("label present"))
        .collect();
    HardPartition {
        labels,
        k: used.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty_clusters() {
        assert!(HardPartition::new(vec![0, 0, 2], 3).is_err());
        assert!(HardPartition::new(vec![0, 1, 3], 3).is_err());
        assert!(HardPartition::new(vec![0, 1, 2], 3).is_ok());
    }

    #[test]
    fn first_occurrence_labels() {
        let p = HardPartition::from_labels(&[5, 5, 2, 9, 2]);
        assert_eq!(p.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.k(), 3);
    }

    #[test]
    fn canonical_order_is_alphabetical() {
        let names: Vec<String> = ["Sweden", "Belarus", "Austria", "Russia"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let p = HardPartition::new(vec![0, 1, 0, 1], 2).unwrap();
        let (c, order) = p.canonicalize(&names);
        // Cluster with Austria comes first, then Belarus.
        assert_eq!(c.labels(), &[0, 1, 0, 1]);
        assert_eq!(order, vec![0, 1]);
        let p = HardPartition::new(vec![1, 0, 1, 0], 2).unwrap();
        let (c, order) = p.canonicalize(&names);
        assert_eq!(c.labels(), &[0, 1, 0, 1]);
        assert_eq!(order, vec![1, 0]);
    }

    #[test]
    fn harden_examples() {
        let crisp = HardPartition::new(vec![1, 0, 2, 1], 3).unwrap();
        assert_eq!(harden(&FuzzyPartition::from_hard(&crisp, 2.0)), crisp);

        let f = FuzzyPartition::new(vec![0.5, 0.5, 0.4, 0.6], 2, 2, 2.0).unwrap();
        assert_eq!(harden(&f).labels(), &[0, 1]);

        let f = FuzzyPartition::new(vec![1.0 / 3.0; 3], 1, 3, 2.0).unwrap();
        assert_eq!(harden(&f).labels(), &[0]);
    }

    #[test]
    fn fuzzy_validation() {
        assert!(FuzzyPartition::new(vec![0.5, 0.6], 1, 2, 2.0).is_err());
        assert!(FuzzyPartition::new(vec![1.2, -0.2], 1, 2, 2.0).is_err());
        assert!(FuzzyPartition::new(vec![0.5], 1, 2, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn harden_ignores_row_scaling(
            rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..10),
            scale in prop::collection::vec(0.1f64..10.0, 10),
        ) {
            let n = rows.len();
            let mut base = Vec::new();
            let mut scaled = Vec::new();
            for (i, r) in rows.iter().enumerate() {
                let s: f64 = r.iter().sum();
                base.extend(r.iter().map(|v| v / s));
                scaled.extend(r.iter().map(|v| v / s * scale[i]));
            }
            let f = FuzzyPartition::new(base, n, 3, 2.0).unwrap();
            // Scaled rows are no longer stochastic; compare argmax directly.
            let direct: Vec<usize> = (0..n)
                .map(|i| {
                    let row = &scaled[i * 3..i * 3 + 3];
                    let mut b = 0;
                    for g in 1..3 { if row[g] > row[b] { b = g; } }
                    b
                })
                .collect();
            prop_assert!(harden(&f).same_grouping(&HardPartition::from_labels(&direct)));
        }
    }
}
