use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::distance::DistanceMatrix;
use super::partition::HardPartition;
use crate::error::{Error, Result};

/// One agglomeration step. Leaves are `0..n`; the cluster created by merge
/// `s` has id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub height: f64,
    pub new_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub ids: Vec<String>,
    pub merges: Vec<Merge>,
    pub height_convention: String,
}

pub const WARD_D2: &str = "ward.D2: Lance-Williams on squared dissimilarities, height = sqrt(merge cost)";

/// Ward agglomeration with Lance–Williams updates on squared input
/// distances. Ties between candidate pairs go to the lexicographically
/// smallest `(min_id, max_id)`.
pub fn ward_agglomerate(d: &DistanceMatrix) -> Result<Dendrogram> {
    let n = d.len();
    if n < 2 {
        return Err(Error::domain("Ward agglomeration needs at least two entities"));
    }
    // Slot-indexed squared distances; slot s holds cluster ids[s].
    let mut d2: Vec<f64> = (0..n * n)
        .map(|k| d.get(k / n, k % n).powi(2))
        .collect();
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let v = d2[i * n + j];
                let a = cluster_id[i].min(cluster_id[j]);
                let b = cluster_id[i].max(cluster_id[j]);
                let better = match best {
                    None => true,
                    Some((bv, key, _, _)) => v < bv || (v == bv && (a, b) < key),
                };
                if better {
                    best = Some((v, (a, b), i, j));
                }
            }
        }
        let (dij, (a, b), i, j) = best.expect("at least two active clusters");
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let updated = ((ni + nk) * d2[i * n + k] + (nj + nk) * d2[j * n + k] - nk * dij)
                / (ni + nj + nk);
            d2[i * n + k] = updated;
            d2[k * n + i] = updated;
        }
        active[j] = false;
        size[i] += size[j];
        cluster_id[i] = n + step;
        merges.push(Merge {
            cluster_a: a,
            cluster_b: b,
            height: dij.max(0.0).sqrt(),
            new_size: size[i],
        });
    }
    Ok(Dendrogram {
        ids: d.ids().to_vec(),
        merges,
        height_convention: WARD_D2.to_string(),
    })
}

impl Dendrogram {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Leaves under each node id, for ids `0..2n-1`.
    fn leaf_sets(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut s = sets[m.cluster_a].clone();
            s.extend_from_slice(&sets[m.cluster_b]);
            sets.push(s);
        }
        sets
    }

    /// Leaf order for drawing (left-to-right traversal of the tree).
    pub fn leaf_order(&self) -> Vec<usize> {
        match self.merges.last() {
            None => (0..self.n()).collect(),
            Some(_) => {
                let sets = self.leaf_sets();
                sets[sets.len() - 1].clone()
            }
        }
    }

    /// Newick string with branch lengths equal to height differences.
    pub fn to_newick(&self) -> String {
        let n = self.n();
        fn node(d: &Dendrogram, id: usize, out: &mut String) -> f64 {
            let n = d.ids.len();
            if id < n {
                out.push_str(&newick_label(&d.ids[id]));
                return 0.0;
            }
            let m = &d.merges[id - n];
            out.push('(');
            let ha = node(d, m.cluster_a, out);
            let _ = write!(out, ":{}", fmt_len(m.height - ha));
            out.push(',');
            let hb = node(d, m.cluster_b, out);
            let _ = write!(out, ":{}", fmt_len(m.height - hb));
            out.push(')');
            m.height
        }
        let mut out = String::new();
        if n == 1 {
            out.push_str(&newick_label(&self.ids[0]));
        } else {
            node(self, 2 * n - 2, &mut out);
        }
        out.push(';');
        out
    }
}

fn fmt_len(v: f64) -> String {
    format!("{:.10}", v.max(0.0))
}

fn newick_label(s: &str) -> String {
    if s.chars().any(|c| "(),:;[]' \t".contains(c)) {
        format!("'{}'", s.replace('\'', "''"))
    } else {
        s.to_string()
    }
}

/// The partition present after `n − k` merges; clusters numbered by first
/// entity.
pub fn cut_dendrogram(d: &Dendrogram, k: usize) -> Result<HardPartition> {
    let n = d.n();
    if k == 0 || k > n {
        return Err(Error::domain(format!("cannot cut {n} leaves into {k} clusters")));
    }
    // Union-find over node ids.
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, m) in d.merges.iter().take(n - k).enumerate() {
        let node = n + s;
        let a = find(&mut parent, m.cluster_a);
        let b = find(&mut parent, m.cluster_b);
        parent[a] = node;
        parent[b] = node;
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    Ok(HardPartition::from_labels(&roots))
}
