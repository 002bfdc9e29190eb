use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::layout::fr_layout;
use super::RunReport;
use crate::clustering::HardPartition;
use crate::error::{Error, Result};

pub const LAYOUT_SEED: u64 = 7;
const LAYOUT_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusEdge {
    pub source: usize,
    pub target: usize,
    pub weight: u32,
}

/// Co-clustering counts across methods. Only pairs clustered together at
/// least once carry an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusGraph {
    pub nodes: Vec<String>,
    pub n_methods: usize,
    pub edges: Vec<ConsensusEdge>,
    pub layout: Vec<[f64; 2]>,
}

/// Count, for every pair of entities, the partitions that put them in the
/// same cluster.
pub fn consensus(nodes: &[String], partitions: &[HardPartition]) -> Result<ConsensusGraph> {
    if partitions.is_empty() {
        return Err(Error::domain("consensus needs at least one partition"));
    }
    let n = nodes.len();
    if let Some(p) = partitions.iter().find(|p| p.len() != n) {
        return Err(Error::domain(format!(
            "partition covers {} entities, expected {n}",
            p.len()
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = partitions
                .iter()
                .filter(|p| p.labels()[i] == p.labels()[j])
                .count() as u32;
            if w > 0 {
                edges.push(ConsensusEdge {
                    source: i,
                    target: j,
                    weight: w,
                });
            }
        }
    }
    let weighted: Vec<(usize, usize, f64)> = edges
        .iter()
        .map(|e| (e.source, e.target, f64::from(e.weight)))
        .collect();
    Ok(ConsensusGraph {
        nodes: nodes.to_vec(),
        n_methods: partitions.len(),
        layout: fr_layout(n, &weighted, LAYOUT_ITERATIONS, LAYOUT_SEED),
        edges,
    })
}

/// Consensus over run reports; the reports may list countries in any order
/// but must cover the same set.
pub fn consensus_from_reports(reports: &[RunReport]) -> Result<ConsensusGraph> {
    let first = reports
        .first()
        .ok_or_else(|| Error::domain("consensus needs at least one run report"))?;
    let nodes = first.countries.clone();
    let mut sorted = nodes.clone();
    sorted.sort();
    let mut partitions = Vec::with_capacity(reports.len());
    for r in reports {
        let mut theirs = r.countries.clone();
        theirs.sort();
        if theirs != sorted {
            return Err(Error::domain(format!(
                "run report for {} covers a different country set",
                r.spec.name
            )));
        }
        let labels: Vec<usize> = nodes
            .iter()
            .map(|c| {
                let i = r.countries.iter().position(|x| x == c).expect("same set");
                r.labels[i]
            })
            .collect();
        partitions.push(HardPartition::from_labels(&labels));
    }
    consensus(&nodes, &partitions)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl ConsensusGraph {
    pub fn weight(&self, i: usize, j: usize) -> u32 {
        let (a, b) = (i.min(j), i.max(j));
        self.edges
            .iter()
            .find(|e| e.source == a && e.target == b)
            .map_or(0, |e| e.weight)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn max_weight(&self) -> u32 {
        self.edges.iter().map(|e| e.weight).max().unwrap_or(0)
    }

    pub fn to_graphml(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        out.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"x\" for=\"node\" attr.name=\"x\" attr.type=\"double\"/>\n");
        out.push_str("  <key id=\"y\" for=\"node\" attr.name=\"y\" attr.type=\"double\"/>\n");
        out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"int\"/>\n");
        out.push_str("  <graph id=\"consensus\" edgedefault=\"undirected\">\n");
        for (i, name) in self.nodes.iter().enumerate() {
            let [x, y] = self.layout[i];
            let _ = writeln!(
                out,
                "    <node id=\"n{i}\"><data key=\"label\">{}</data><data key=\"x\">{x}</data><data key=\"y\">{y}</data></node>",
                xml_escape(name)
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "    <edge source=\"n{}\" target=\"n{}\"><data key=\"weight\">{}</data></edge>",
                e.source, e.target, e.weight
            );
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }
}
