//! Synthetic life tables with HMD-style rounding, and a planted-group panel
//! generator used for offline testing and demos.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmd::serialize_lifetable_file;
use crate::lifetable::{
    qx_from_mx, AgeGrid, IntervalWidth, LifeTableRow, LifeTableValues, MortalityPanel, RADIX,
};

fn round_to(v: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (v * s).round() / s
}

/// Separation factor for the first year of life (Coale–Demeny style,
/// averaged over sexes).
fn infant_ax(m0: f64) -> f64 {
    if m0 >= 0.107 {
        0.34
    } else {
        0.049 + 2.742 * m0
    }
}

/// Complete a life table from central death rates, rounding every column
/// to the precision HMD publishes. Rates are first rounded to 5 decimals
/// (floored at 1e-5) so the table reads back unchanged from text.
pub fn life_table_from_mx(grid: &AgeGrid, mx: &[f64]) -> Result<Vec<LifeTableValues>> {
    if mx.len() != grid.len() {
        return Err(Error::domain(format!(
            "{} rates for a {}-group grid",
            mx.len(),
            grid.len()
        )));
    }
    if mx.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::domain("synthetic rates must be positive and finite"));
    }
    let mut rows = Vec::with_capacity(mx.len());
    let mut lx = RADIX;
    for (a, interval) in grid.intervals().iter().enumerate() {
        let m = round_to(mx[a], 5).max(1e-5);
        let (ax, qx, dx, lived) = match interval.width {
            IntervalWidth::Years(n) => {
                let nf = f64::from(n);
                let ax = round_to(
                    if interval.lower == 0 && n == 1 {
                        infant_ax(m)
                    } else if interval.lower == 1 && n == 4 {
                        1.5
                    } else {
                        nf / 2.0
                    },
                    2,
                );
                let q = qx_from_mx(m, interval.width, ax)?.value;
                let next = (lx * (1.0 - q)).round();
                let dx = lx - next;
                (ax, round_to(q, 5), dx, (nf * next + ax * dx).round())
            }
            IntervalWidth::Open => {
                let ax = round_to(1.0 / m, 2);
                (ax, 1.0, lx, (lx / m).round())
            }
        };
        rows.push(LifeTableValues {
            mx: m,
            qx,
            ax,
            lx,
            dx,
            person_years: lived,
            tx: 0.0,
            ex: 0.0,
        });
        lx -= dx;
    }
    let mut tx = 0.0;
    for row in rows.iter_mut().rev() {
        tx += row.person_years;
        row.tx = tx;
        row.ex = if row.lx > 0.0 {
            round_to(tx / row.lx, 2)
        } else {
            row.ax
        };
    }
    Ok(rows)
}

/// Parameters of the planted generator. Each group has its own level and
/// age profile of improvement; countries inside a group differ by small
/// level and pace perturbations plus cell noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub groups: usize,
    pub per_group: usize,
    pub year_min: i32,
    pub year_max: i32,
    /// Half-width of the uniform noise added to each log rate.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            groups: 3,
            per_group: 5,
            year_min: 1960,
            year_max: 2010,
            noise: 0.02,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPanel {
    pub panel: MortalityPanel,
    /// Group of each panel country, in panel order.
    pub truth: Vec<usize>,
}

const GROUP_LEVEL: [f64; 4] = [0.0, 0.45, -0.35, 0.9];

/// Improvement rate (per year, log scale) at age `x` for group `g`.
fn improvement(g: usize, x: f64) -> f64 {
    let young = (-x / 25.0).exp();
    match g % 4 {
        0 => -0.030 * young - 0.008 * (1.0 - young),
        1 => -0.012,
        2 => -0.004 * young - 0.022 * (1.0 - young),
        _ => 0.004 * young - 0.002,
    }
}

fn baseline_log_mx(x: f64) -> f64 {
    (0.03 * (-1.2 * x).exp() + 0.001 + 0.00002 * (0.085 * x).exp()).ln()
}

/// Saturates closed-interval rates below 0.38 so qx stays under 1 without
/// creating ties between countries.
fn soft_cap(m: f64) -> f64 {
    0.38 * (1.0 - (-m / 0.38).exp())
}

fn midpoint(grid: &AgeGrid, a: usize) -> f64 {
    let i = &grid.intervals()[a];
    match i.width {
        IntervalWidth::Years(n) => f64::from(i.lower) + f64::from(n) / 2.0,
        IntervalWidth::Open => f64::from(i.lower) + 2.5,
    }
}

/// Country codes `A01..`, `B01..`, one letter per group.
pub fn planted_code(group: usize, member: usize) -> String {
    format!("{}{:02}", (b'A' + group as u8) as char, member + 1)
}

pub fn planted_panel(spec: &PlantedSpec) -> Result<PlantedPanel> {
    if spec.groups == 0 || spec.groups > 4 || spec.per_group == 0 {
        return Err(Error::domain("planted generator supports 1-4 groups of at least one country"));
    }
    if spec.year_min > spec.year_max {
        return Err(Error::domain("year_min exceeds year_max"));
    }
    let grid = AgeGrid::abridged();
    let years: Vec<i32> = (spec.year_min..=spec.year_max).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut countries = Vec::new();
    let mut truth = Vec::new();
    let mut cells = Vec::new();
    for g in 0..spec.groups {
        for c in 0..spec.per_group {
            countries.push(planted_code(g, c));
            truth.push(g);
            let level: f64 = rng.random_range(-0.05..=0.05);
            let pace: f64 = rng.random_range(0.95..=1.05);
            for &year in &years {
                let t = f64::from(year - spec.year_min);
                let mx: Vec<f64> = (0..grid.len())
                    .map(|a| {
                        let x = midpoint(&grid, a);
                        let noise = if spec.noise > 0.0 {
                            rng.random_range(-spec.noise..=spec.noise)
                        } else {
                            0.0
                        };
                        let log_m = baseline_log_mx(x)
                            + GROUP_LEVEL[g]
                            + level
                            + pace * improvement(g, x) * t
                            + noise;
                        let m = log_m.exp();
                        if grid.intervals()[a].is_open() {
                            m
                        } else {
                            soft_cap(m)
                        }
                    })
                    .collect();
                cells.extend(life_table_from_mx(&grid, &mx)?);
            }
        }
    }
    Ok(PlantedPanel {
        panel: MortalityPanel::new(countries, years, grid, cells)?,
        truth,
    })
}

/// Write one `<CODE>.bltper_5x1.txt` per panel country into `dir`.
pub fn write_hmd_directory(panel: &MortalityPanel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (c, code) in panel.countries().iter().enumerate() {
        let rows: Vec<LifeTableRow> = panel
            .rows()
            .filter(|r| r.country == *code)
            .collect();
        debug_assert_eq!(rows.len(), panel.years().len() * panel.grid().len());
        let title = format!(
            "{code} (synthetic), Life tables (period 5x1), Total\tLast modified: 01 Jan 2000; Methods Protocol: v6 (2017)"
        );
        let text = serialize_lifetable_file(&title, panel.grid(), &rows);
        fs::write(dir.join(format!("{code}.bltper_5x1.txt")), text)?;
        log::debug!("wrote synthetic country {c}: {code}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmd::{build_panel, parse_lifetable_file, DataSelection};
    use std::collections::BTreeMap;

    #[test]
    fn table_identities_hold() {
        let grid = AgeGrid::abridged();
        let mx: Vec<f64> = (0..grid.len()).map(|a| soft_cap(baseline_log_mx(midpoint(&grid, a)).exp())).collect();
        let rows = life_table_from_mx(&grid, &mx).unwrap();
        assert_eq!(rows[0].lx, RADIX);
        let deaths: f64 = rows.iter().map(|r| r.dx).sum();
        assert_eq!(deaths, RADIX);
        for w in rows.windows(2) {
            assert_eq!(w[0].lx - w[0].dx, w[1].lx);
            assert_eq!(w[0].tx - w[0].person_years, w[1].tx);
        }
        assert_eq!(rows.last().unwrap().qx, 1.0);
        assert!(rows[0].ex > 50.0 && rows[0].ex < 90.0, "e0 {}", rows[0].ex);
    }

    #[test]
    fn planted_panel_round_trips_through_text() {
        let spec = PlantedSpec {
            groups: 2,
            per_group: 2,
            year_min: 2000,
            year_max: 2003,
            ..Default::default()
        };
        let planted = planted_panel(&spec).unwrap();
        assert_eq!(planted.truth, vec![0, 0, 1, 1]);
        let mut files = BTreeMap::new();
        for (c, code) in planted.panel.countries().iter().enumerate() {
            let rows: Vec<LifeTableRow> = planted.panel.rows().filter(|r| r.country == *code).collect();
            let text = serialize_lifetable_file("X, Life tables (period 5x1), Total", planted.panel.grid(), &rows);
            let parsed = parse_lifetable_file(text.as_bytes(), code, None).unwrap();
            assert!(parsed.warnings.is_empty(), "country {c}");
            files.insert(code.clone(), parsed);
        }
        let sel = DataSelection::new(planted.panel.countries().to_vec(), 2000, 2003).unwrap();
        assert_eq!(build_panel(&files, &sel).unwrap(), planted.panel);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = planted_panel(&PlantedSpec::default()).unwrap();
        let b = planted_panel(&PlantedSpec::default()).unwrap();
        assert_eq!(a, b);
        let other = planted_panel(&PlantedSpec {
            seed: 12,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.panel, other.panel);
    }
}
