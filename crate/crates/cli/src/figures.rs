//! SVG figures for pipeline runs, sweeps and the consensus graph.
//!
//! Every mark carries a `class` attribute (`leaf`, `merge`, `band`,
//! `median`, `country-line`, `cluster-mean`, `bar`, `edge`, `node`, ...) so
//! the output can be checked structurally.

use mortclust::clustering::{Dendrogram, FuzzyPartition, HardPartition};
use mortclust::lifetable::IndexArray;
use mortclust::pipelines::ConsensusGraph;
use mortclust::validity::{ValidityIndex, ValiditySweep};
use nalgebra::DMatrix;

use crate::svg::{color, legend, Frame, Svg};

fn cluster_legend(k: usize) -> Vec<(String, &'static str)> {
    (0..k).map(|g| (format!("Cluster {}", g + 1), color(g))).collect()
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ward dendrogram; leaves coloured by cluster.
pub fn dendrogram(d: &Dendrogram, names: &[String], p: &HardPartition) -> String {
    let n = d.n();
    let order = d.leaf_order();
    let mut pos = vec![0.0; 2 * n - 1];
    let mut height = vec![0.0; 2 * n - 1];
    for (slot, &leaf) in order.iter().enumerate() {
        pos[leaf] = slot as f64;
    }
    for (s, m) in d.merges.iter().enumerate() {
        pos[n + s] = (pos[m.cluster_a] + pos[m.cluster_b]) / 2.0;
        height[n + s] = m.height;
    }
    let top = d.merges.last().map_or(1.0, |m| m.height);
    let width = 120.0 + 22.0 * n as f64;
    let mut svg = Svg::new(width, 460.0);
    let fr = Frame::new(70.0, 40.0, width - 100.0, 280.0, (-0.5, n as f64 - 0.5), (0.0, top));
    fr.draw_axes(&mut svg, "Ward dendrogram (Hellinger distance)", "", "height");
    for (s, m) in d.merges.iter().enumerate() {
        let h = height[n + s];
        let pts = [
            (pos[m.cluster_a], height[m.cluster_a]),
            (pos[m.cluster_a], h),
            (pos[m.cluster_b], h),
            (pos[m.cluster_b], height[m.cluster_b]),
        ];
        svg.polyline(&fr.map(&pts), "#444", 1.2, "merge");
    }
    for &leaf in &order {
        let x = fr.px(pos[leaf]);
        let y = fr.py(0.0) + 8.0;
        let col = color(p.labels()[leaf]);
        svg.circle(x, fr.py(0.0), 3.0, col, "leaf-marker");
        svg.vtext(x + 3.0, y, &names[leaf], 10.0, "end", "leaf");
    }
    legend(&mut svg, width - 110.0, 60.0, &cluster_legend(p.k()));
    svg.finish()
}

/// Per-cluster 10–90% and 25–75% bands and median of d* by age, pooled
/// over member countries and years.
pub fn dstar_bands(dstar: &IndexArray, age_lower: &[f64], p: &HardPartition) -> String {
    let (_, ny, na) = dstar.dims();
    let panel_w = 300.0;
    let mut svg = Svg::new(80.0 + (panel_w + 70.0) * p.k() as f64, 380.0);
    let ymax = min_max(dstar.values().iter().copied()).1;
    for g in 0..p.k() {
        let members = p.members(g);
        let fr = Frame::new(
            70.0 + (panel_w + 70.0) * g as f64,
            40.0,
            panel_w,
            270.0,
            (age_lower[0], age_lower[na - 1]),
            (0.0, ymax),
        );
        fr.draw_axes(&mut svg, &format!("Cluster {}: normalised deaths", g + 1), "age", "d*");
        let mut q = vec![[0.0; 5]; na];
        for (a, qa) in q.iter_mut().enumerate() {
            let mut v: Vec<f64> = members
                .iter()
                .flat_map(|&c| (0..ny).map(move |t| (c, t)))
                .map(|(c, t)| dstar.get(c, t, a))
                .collect();
            v.sort_by(f64::total_cmp);
            for (slot, prob) in [0.1, 0.25, 0.5, 0.75, 0.9].into_iter().enumerate() {
                qa[slot] = quantile(&v, prob);
            }
        }
        for (lo, hi, opacity) in [(0, 4, 0.2), (1, 3, 0.4)] {
            let mut pts: Vec<(f64, f64)> = (0..na).map(|a| (age_lower[a], q[a][hi])).collect();
            pts.extend((0..na).rev().map(|a| (age_lower[a], q[a][lo])));
            svg.polygon(&fr.map(&pts), color(g), opacity, "band");
        }
        let median: Vec<(f64, f64)> = (0..na).map(|a| (age_lower[a], q[a][2])).collect();
        svg.polyline(&fr.map(&median), color(g), 1.8, "median");
    }
    svg.finish()
}

/// One line per country over the age axis, coloured by cluster.
pub fn age_profiles(
    values: &DMatrix<f64>,
    age_lower: &[f64],
    p: &HardPartition,
    title: &str,
    ylabel: &str,
) -> String {
    let mut svg = Svg::new(620.0, 400.0);
    let fr = Frame::new(
        70.0,
        40.0,
        420.0,
        300.0,
        (age_lower[0], age_lower[age_lower.len() - 1]),
        min_max(values.iter().copied()),
    );
    fr.draw_axes(&mut svg, title, "age", ylabel);
    for (c, row) in values.row_iter().enumerate() {
        let pts: Vec<(f64, f64)> = row.iter().enumerate().map(|(a, &v)| (age_lower[a], v)).collect();
        svg.polyline(&fr.map(&pts), color(p.labels()[c]), 1.0, "country-line");
    }
    legend(&mut svg, 510.0, 60.0, &cluster_legend(p.k()));
    svg.finish()
}

/// Cluster-mean log mx over time for selected age groups, one panel each.
pub fn cluster_mean_trends(
    logm: &IndexArray,
    age_slots: &[(usize, String)],
    p: &HardPartition,
) -> String {
    let (_, ny, _) = logm.dims();
    let years: Vec<f64> = logm.years.iter().map(|&y| f64::from(y)).collect();
    let panel_w = 260.0;
    let mut svg = Svg::new(90.0 + (panel_w + 80.0) * age_slots.len() as f64, 380.0);
    for (s, (a, label)) in age_slots.iter().enumerate() {
        let means: Vec<Vec<f64>> = (0..p.k())
            .map(|g| {
                let members = p.members(g);
                (0..ny)
                    .map(|t| members.iter().map(|&c| logm.get(c, t, *a)).sum::<f64>() / members.len() as f64)
                    .collect()
            })
            .collect();
        let fr = Frame::new(
            75.0 + (panel_w + 80.0) * s as f64,
            40.0,
            panel_w,
            260.0,
            (years[0], years[ny - 1]),
            min_max(means.iter().flatten().copied()),
        );
        fr.draw_axes(&mut svg, &format!("age {label}"), "year", "mean log mx");
        for (g, m) in means.iter().enumerate() {
            let pts: Vec<(f64, f64)> = years.iter().copied().zip(m.iter().copied()).collect();
            svg.polyline(&fr.map(&pts), color(g), 1.8, "cluster-mean");
        }
    }
    legend(&mut svg, 80.0, 350.0, &cluster_legend(p.k()));
    svg.finish()
}

/// Membership in `cluster` per country, sorted descending.
pub fn membership_bars(names: &[String], f: &FuzzyPartition, cluster: usize) -> String {
    let mut rows: Vec<(f64, &String)> = (0..f.n()).map(|i| (f.get(i, cluster), &names[i])).collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let bar_h = 16.0;
    let height = 80.0 + bar_h * rows.len() as f64;
    let mut svg = Svg::new(560.0, height);
    let fr = Frame::new(150.0, 40.0, 340.0, bar_h * rows.len() as f64, (0.0, 1.0), (0.0, 1.0));
    svg.text(320.0, 24.0, &format!("Membership level of Cluster {}", cluster + 1), 12.0, "middle", "title");
    for (i, (u, name)) in rows.iter().enumerate() {
        let y = 40.0 + bar_h * i as f64;
        svg.rect(fr.px(0.0), y + 2.0, fr.px(*u) - fr.px(0.0), bar_h - 4.0, color(cluster), "bar");
        svg.text(fr.px(0.0) - 6.0, y + bar_h - 4.0, name, 10.0, "end", "bar-label");
        svg.text(fr.px(*u) + 4.0, y + bar_h - 4.0, &format!("{u:.2}"), 9.0, "start", "bar-value");
    }
    svg.line(fr.px(0.5), 36.0, fr.px(0.5), height - 36.0, "#888", 0.8);
    svg.finish()
}

/// Fitted e0 curves coloured by cluster, observations as faint points.
pub fn e0_curves(
    years: &[f64],
    observed: &IndexArray,
    fitted: &[Vec<f64>],
    p: &HardPartition,
) -> String {
    let mut svg = Svg::new(620.0, 400.0);
    let yr = min_max(observed.values().iter().copied().chain(fitted.iter().flatten().copied()));
    let fr = Frame::new(70.0, 40.0, 420.0, 300.0, (years[0], years[years.len() - 1]), yr);
    fr.draw_axes(&mut svg, "Life expectancy at birth", "year", "e0");
    for (c, curve) in fitted.iter().enumerate() {
        let col = color(p.labels()[c]);
        let pts: Vec<(f64, f64)> = years.iter().copied().zip(curve.iter().copied()).collect();
        svg.polyline(&fr.map(&pts), col, 1.2, "country-line");
    }
    legend(&mut svg, 510.0, 60.0, &cluster_legend(p.k()));
    svg.finish()
}

/// One index over k, the preferred k highlighted.
pub fn sweep_plot(s: &ValiditySweep, idx: ValidityIndex) -> String {
    let values = &s.scores[&idx];
    let ks: Vec<f64> = s.k_values.iter().map(|&k| k as f64).collect();
    let mut svg = Svg::new(480.0, 340.0);
    let fr = Frame::new(
        70.0,
        40.0,
        370.0,
        240.0,
        (ks[0] - 0.5, ks[ks.len() - 1] + 0.5),
        min_max(values.iter().copied().filter(|v| v.is_finite())),
    );
    let dir = if idx.higher_is_better() { "higher is better" } else { "lower is better" };
    fr.draw_axes(&mut svg, &format!("{} ({dir})", idx.name()), "number of clusters", idx.name());
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .copied()
        .zip(values.iter().copied())
        .filter(|(_, v)| v.is_finite())
        .collect();
    svg.polyline(&fr.map(&pts), color(0), 1.5, "score-line");
    for &(x, y) in &pts {
        let best = s.selected.get(&idx).is_some_and(|&k| k as f64 == x);
        svg.circle(fr.px(x), fr.py(y), if best { 5.0 } else { 3.0 }, if best { color(1) } else { color(0) }, if best { "selected" } else { "point" });
    }
    svg.finish()
}

/// Objective (WSS or J_m) over k.
pub fn objective_plot(s: &ValiditySweep, objective: &[f64]) -> String {
    let ks: Vec<f64> = s.k_values.iter().map(|&k| k as f64).collect();
    let mut svg = Svg::new(480.0, 340.0);
    let fr = Frame::new(
        70.0,
        40.0,
        370.0,
        240.0,
        (ks[0] - 0.5, ks[ks.len() - 1] + 0.5),
        min_max(objective.iter().copied()),
    );
    fr.draw_axes(&mut svg, "clustering objective", "number of clusters", "objective");
    let pts: Vec<(f64, f64)> = ks.iter().copied().zip(objective.iter().copied()).collect();
    svg.polyline(&fr.map(&pts), color(0), 1.5, "score-line");
    for &(x, y) in &pts {
        svg.circle(fr.px(x), fr.py(y), 3.0, color(0), "point");
    }
    svg.finish()
}

/// Consensus graph drawn at its stored layout.
pub fn consensus_graph(g: &ConsensusGraph, names: &[String]) -> String {
    let size = 640.0;
    let margin = 70.0;
    let mut svg = Svg::new(size, size);
    let at = |i: usize| {
        let [x, y] = g.layout[i];
        (margin + x * (size - 2.0 * margin), margin + (1.0 - y) * (size - 2.0 * margin))
    };
    svg.text(size / 2.0, 24.0, &format!("Co-clustering across {} methods", g.n_methods), 13.0, "middle", "title");
    for e in &g.edges {
        let (x1, y1) = at(e.source);
        let (x2, y2) = at(e.target);
        let w = f64::from(e.weight) / g.n_methods as f64;
        svg.line(x1, y1, x2, y2, if e.weight as usize == g.n_methods { "#555" } else { "#aaa" }, 0.5 + 2.5 * w);
    }
    for (i, name) in names.iter().enumerate() {
        let (x, y) = at(i);
        svg.circle(x, y, 6.0, color(0), "node");
        svg.text(x, y - 9.0, name, 10.0, "middle", "node-label");
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mortclust::clustering::{ward_agglomerate, DistanceMatrix};
    use mortclust::exec::Execution;
    use mortclust::pipelines::consensus;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn dendrogram_structure() {
        let ids: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
        let d = DistanceMatrix::from_fn(ids.clone(), Execution::Sequential, |i, j| (i as f64 - j as f64).abs()).unwrap();
        let dend = ward_agglomerate(&d).unwrap();
        let p = HardPartition::from_labels(&[0, 0, 1, 1, 1]);
        let svg = dendrogram(&dend, &ids, &p);
        assert_eq!(svg.matches("class=\"leaf\"").count(), 5);
        assert_eq!(svg.matches("class=\"merge\"").count(), 4);
    }

    #[test]
    fn consensus_structure() {
        let names: Vec<String> = (0..4).map(|i| format!("n{i}")).collect();
        let g = consensus(&names, &[HardPartition::from_labels(&[0, 0, 1, 1])]).unwrap();
        let svg = consensus_graph(&g, &names);
        assert_eq!(svg.matches("class=\"node\"").count(), 4);
        assert_eq!(svg.matches("<line ").count(), 2);
    }
}
