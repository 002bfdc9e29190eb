//! Reading HMD period life tables (combined sex, 5×1 layout) and assembling
//! them into a [`MortalityPanel`]; canonical CSV/JSON panel artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lifetable::{AgeGrid, AgeInterval, LifeTableRow, LifeTableValues, MortalityPanel};

pub const HEADER: [&str; 10] = ["Year", "Age", "mx", "qx", "ax", "lx", "dx", "Lx", "Tx", "ex"];

/// HMD codes and display names of the 30 populations of the replication
/// panel. Multi-series countries use their total-population series.
pub const REPLICATION_COUNTRIES: [(&str, &str); 30] = [
    ("AUS", "Australia"),
    ("AUT", "Austria"),
    ("BEL", "Belgium"),
    ("BGR", "Bulgaria"),
    ("BLR", "Belarus"),
    ("CAN", "Canada"),
    ("CHE", "Switzerland"),
    ("CZE", "Czechia"),
    ("DNK", "Denmark"),
    ("ESP", "Spain"),
    ("EST", "Estonia"),
    ("FIN", "Finland"),
    ("FRATNP", "France"),
    ("GBR_NP", "United Kingdom"),
    ("HUN", "Hungary"),
    ("IRL", "Ireland"),
    ("ITA", "Italy"),
    ("JPN", "Japan"),
    ("LTU", "Lithuania"),
    ("LVA", "Latvia"),
    ("NLD", "Netherlands"),
    ("NOR", "Norway"),
    ("NZL_NP", "New Zealand"),
    ("POL", "Poland"),
    ("PRT", "Portugal"),
    ("RUS", "Russia"),
    ("SVK", "Slovakia"),
    ("SWE", "Sweden"),
    ("UKR", "Ukraine"),
    ("USA", "United States"),
];

/// Display name for an HMD code; unknown codes are returned unchanged.
pub fn display_name(code: &str) -> &str {
    REPLICATION_COUNTRIES
        .iter()
        .find(|(c, _)| *c == code)
        .map_or(code, |(_, name)| name)
}

pub fn code_for_name(name: &str) -> Option<&'static str> {
    REPLICATION_COUNTRIES
        .iter()
        .find(|(_, n)| n.eq_ignore_ascii_case(name))
        .map(|(c, _)| *c)
}

/// Which populations and years go into a panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSelection {
    pub country_codes: Vec<String>,
    pub year_min: i32,
    pub year_max: i32,
    pub require_complete: bool,
}

impl DataSelection {
    pub fn new(country_codes: Vec<String>, year_min: i32, year_max: i32) -> Result<Self> {
        if year_min > year_max {
            return Err(Error::domain(format!(
                "year_min {year_min} exceeds year_max {year_max}"
            )));
        }
        if country_codes.is_empty() {
            return Err(Error::domain("selection has no countries"));
        }
        Ok(DataSelection {
            country_codes,
            year_min,
            year_max,
            require_complete: true,
        })
    }

    /// 30 countries, 1960–2010.
    pub fn replication() -> Self {
        DataSelection {
            country_codes: REPLICATION_COUNTRIES
                .iter()
                .map(|(c, _)| c.to_string())
                .collect(),
            year_min: 1960,
            year_max: 2010,
            require_complete: true,
        }
    }

    pub fn years(&self) -> RangeInclusive<i32> {
        self.year_min..=self.year_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrityWarning {
    pub line: usize,
    pub year: i32,
    pub message: String,
}

/// One parsed life-table file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLifeTable {
    pub title: String,
    pub grid: AgeGrid,
    pub rows: Vec<LifeTableRow>,
    pub warnings: Vec<IntegrityWarning>,
}

impl ParsedLifeTable {
    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.rows.iter().map(|r| r.year).collect();
        years.dedup();
        years
    }
}

/// Parse an HMD `bltper_5x1` text file.
///
/// Rows whose year falls outside `years` are skipped without inspecting
/// their numeric fields, so `"."` placeholders there are tolerated.
pub fn parse_lifetable_file(
    bytes: &[u8],
    country: &str,
    years: Option<RangeInclusive<i32>>,
) -> Result<ParsedLifeTable> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "input is not valid UTF-8".into(),
    })?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, title) = lines.next().ok_or_else(|| Error::Format {
        line: 1,
        message: "empty file".into(),
    })?;
    if !title.contains("Life tables") {
        return Err(Error::Format {
            line: 1,
            message: format!("title line does not look like an HMD life table: {title:?}"),
        });
    }
    match lines.next() {
        Some((_, l)) if l.trim().is_empty() => {}
        _ => {
            return Err(Error::Format {
                line: 2,
                message: "expected blank line after title".into(),
            })
        }
    }
    let (header_line, header) = lines.next().ok_or_else(|| Error::Format {
        line: 3,
        message: "missing column header".into(),
    })?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens != HEADER {
        return Err(Error::Format {
            line: header_line,
            message: format!("unexpected column header {tokens:?}"),
        });
    }

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut blocks: Vec<(i32, Vec<AgeInterval>)> = Vec::new();

    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != HEADER.len() {
            return Err(Error::Format {
                line: line_no,
                message: format!("expected {} fields, found {}", HEADER.len(), fields.len()),
            });
        }
        let year: i32 = fields[0].parse().map_err(|_| Error::Format {
            line: line_no,
            message: format!("bad year {:?}", fields[0]),
        })?;
        let age = AgeInterval::parse(fields[1]).ok_or_else(|| Error::Format {
            line: line_no,
            message: format!("bad age token {:?}", fields[1]),
        })?;
        if years.as_ref().is_some_and(|r| !r.contains(&year)) {
            continue;
        }
        let mut nums = [0.0f64; 8];
        for (k, slot) in nums.iter_mut().enumerate() {
            let raw = fields[k + 2];
            if raw == "." {
                return Err(Error::MissingData {
                    line: line_no,
                    column: HEADER[k + 2].to_string(),
                });
            }
            *slot = raw.parse().map_err(|_| Error::Format {
                line: line_no,
                message: format!("bad {} value {raw:?}", HEADER[k + 2]),
            })?;
        }
        let values = LifeTableValues {
            mx: nums[0],
            qx: nums[1],
            ax: nums[2],
            lx: nums[3],
            dx: nums[4],
            person_years: nums[5],
            tx: nums[6],
            ex: nums[7],
        };

        match blocks.last_mut() {
            Some((y, ages)) if *y == year => {
                let prev_lx = rows.last().map_or(f64::INFINITY, |r: &LifeTableRow| r.values.lx);
                if values.lx > prev_lx {
                    warnings.push(IntegrityWarning {
                        line: line_no,
                        year,
                        message: format!("lx increases at age {age}"),
                    });
                }
                ages.push(age);
            }
            _ => {
                if blocks.iter().any(|(y, _)| *y == year) {
                    return Err(Error::Format {
                        line: line_no,
                        message: format!("year {year} appears in two separate blocks"),
                    });
                }
                blocks.push((year, vec![age]));
            }
        }
        let age_index = blocks.last().map_or(0, |(_, a)| a.len() - 1);
        rows.push(LifeTableRow {
            country: country.to_string(),
            year,
            age_index,
            values,
        });
    }

    let grid_intervals = match blocks.first() {
        Some((_, ages)) => ages.clone(),
        None => AgeGrid::abridged().intervals().to_vec(),
    };
    let grid = AgeGrid::new(grid_intervals).map_err(|e| Error::Format {
        line: 4,
        message: e.to_string(),
    })?;
    for (year, ages) in &blocks {
        if ages.as_slice() != grid.intervals() {
            return Err(Error::Format {
                line: 4,
                message: format!("year {year} has a different age layout"),
            });
        }
    }
    for w in &warnings {
        log::warn!("{country} line {}: {}", w.line, w.message);
    }
    Ok(ParsedLifeTable {
        title: title.trim_end().to_string(),
        grid,
        rows,
        warnings,
    })
}

/// Write rows back in HMD text layout with the published precision.
pub fn serialize_lifetable_file(title: &str, grid: &AgeGrid, rows: &[LifeTableRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>6}{:>13}{:>12}{:>9}{:>6}{:>8}{:>8}{:>8}{:>9}{:>7}",
        "Year", "Age", "mx", "qx", "ax", "lx", "dx", "Lx", "Tx", "ex"
    );
    for row in rows {
        let v = &row.values;
        let label = grid
            .get(row.age_index)
            .map_or_else(|| row.age_index.to_string(), AgeInterval::label);
        let _ = writeln!(
            out,
            "{:>6}{:>13}{:>12.5}{:>9.5}{:>6.2}{:>8.0}{:>8.0}{:>8.0}{:>9.0}{:>7.2}",
            row.year, label, v.mx, v.qx, v.ax, v.lx, v.dx, v.person_years, v.tx, v.ex
        );
    }
    out
}

/// Locate `<code>.bltper_5x1.txt` under the usual HMD download layouts.
pub fn find_lifetable_file(data_dir: &Path, code: &str) -> Option<PathBuf> {
    let file = format!("{code}.bltper_5x1.txt");
    [
        data_dir.join(&file),
        data_dir.join("bltper_5x1").join(&file),
        data_dir.join("lt_both").join("bltper_5x1").join(&file),
        data_dir.join(code).join("STATS").join("bltper_5x1.txt"),
    ]
    .into_iter()
    .find(|p| p.is_file())
}

/// Assemble parsed files into a rectangular panel. Countries are ordered by
/// code, years ascending.
pub fn build_panel(
    files: &BTreeMap<String, ParsedLifeTable>,
    sel: &DataSelection,
) -> Result<MortalityPanel> {
    let mut codes = sel.country_codes.clone();
    codes.sort();
    codes.dedup();

    let mut gaps = Vec::new();
    let mut grid: Option<&AgeGrid> = None;
    let mut by_country: Vec<BTreeMap<i32, Vec<&LifeTableRow>>> = Vec::new();
    for code in &codes {
        let Some(parsed) = files.get(code) else {
            gaps.push(format!("{code}: no life-table file"));
            by_country.push(BTreeMap::new());
            continue;
        };
        match grid {
            None => grid = Some(&parsed.grid),
            Some(g) if *g != parsed.grid => {
                gaps.push(format!("{code}: age grid differs from other countries"));
            }
            _ => {}
        }
        let mut years: BTreeMap<i32, Vec<&LifeTableRow>> = BTreeMap::new();
        for row in parsed.rows.iter().filter(|r| sel.years().contains(&r.year)) {
            years.entry(row.year).or_default().push(row);
        }
        by_country.push(years);
    }
    let grid = grid.cloned().unwrap_or_else(AgeGrid::abridged);

    let mut years: Vec<i32> = sel.years().collect();
    for (code, table) in codes.iter().zip(&by_country) {
        if !files.contains_key(code) {
            continue;
        }
        let missing: Vec<i32> = years
            .iter()
            .copied()
            .filter(|y| !table.contains_key(y))
            .collect();
        if !missing.is_empty() && sel.require_complete {
            gaps.push(format!("{code}: missing years {}", format_years(&missing)));
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Assembly { gaps });
    }
    if !sel.require_complete {
        years.retain(|y| by_country.iter().all(|t| t.contains_key(y)));
        if years.is_empty() {
            return Err(Error::Assembly {
                gaps: vec!["no year is present for every selected country".into()],
            });
        }
    }

    let mut cells = Vec::with_capacity(codes.len() * years.len() * grid.len());
    for table in &by_country {
        for y in &years {
            cells.extend(table[y].iter().map(|r| r.values));
        }
    }
    MortalityPanel::new(codes, years, grid, cells)
}

fn format_years(years: &[i32]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < years.len() {
        let start = years[i];
        let mut end = start;
        while i + 1 < years.len() && years[i + 1] == end + 1 {
            i += 1;
            end = years[i];
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}-{end}")
        });
        i += 1;
    }
    parts.join(",")
}

pub const PANEL_CSV_HEADER: [&str; 11] = [
    "country", "year", "age_label", "mx", "qx", "ax", "lx", "dx", "Lx", "Tx", "ex",
];

/// Canonical panel CSV. Floats use shortest round-trip formatting so that
/// [`read_panel_csv`] restores the panel exactly.
pub fn write_panel_csv<W: Write>(panel: &MortalityPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PANEL_CSV_HEADER)?;
    let labels = panel.grid().labels();
    for row in panel.rows() {
        let v = row.values;
        w.write_record([
            row.country.clone(),
            row.year.to_string(),
            labels[row.age_index].clone(),
            v.mx.to_string(),
            v.qx.to_string(),
            v.ax.to_string(),
            v.lx.to_string(),
            v.dx.to_string(),
            v.person_years.to_string(),
            v.tx.to_string(),
            v.ex.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn panel_csv_bytes(panel: &MortalityPanel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_panel_csv(panel, &mut buf)?;
    Ok(buf)
}

pub fn read_panel_csv<R: Read>(reader: R) -> Result<MortalityPanel> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != PANEL_CSV_HEADER {
        return Err(Error::Format {
            line: 1,
            message: format!("unexpected panel CSV header {headers:?}"),
        });
    }
    let mut countries: Vec<String> = Vec::new();
    let mut years: Vec<i32> = Vec::new();
    let mut ages: Vec<AgeInterval> = Vec::new();
    let mut cells = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let bad = |what: &str| Error::Format {
            line,
            message: format!("bad {what}"),
        };
        let country = &record[0];
        let year: i32 = record[1].parse().map_err(|_| bad("year"))?;
        let age = AgeInterval::parse(&record[2]).ok_or_else(|| bad("age_label"))?;
        if countries.last().map(String::as_str) != Some(country) {
            countries.push(country.to_string());
        }
        if countries.len() == 1 {
            if years.last() != Some(&year) {
                years.push(year);
            }
            if years.len() == 1 {
                ages.push(age);
            }
        }
        let mut nums = [0.0; 8];
        for (k, slot) in nums.iter_mut().enumerate() {
            *slot = record[k + 3].parse().map_err(|_| bad(PANEL_CSV_HEADER[k + 3]))?;
        }
        cells.push(LifeTableValues {
            mx: nums[0],
            qx: nums[1],
            ax: nums[2],
            lx: nums[3],
            dx: nums[4],
            person_years: nums[5],
            tx: nums[6],
            ex: nums[7],
        });
    }
    let grid = AgeGrid::new(ages)?;
    MortalityPanel::new(countries, years, grid, cells)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCountry {
    pub code: String,
    pub name: String,
    pub source_file: String,
    pub title: String,
}

/// JSON sidecar of the canonical panel CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelManifest {
    pub selection: DataSelection,
    pub population_variant: String,
    pub countries: Vec<ManifestCountry>,
    pub years: Vec<i32>,
    pub age_groups: Vec<String>,
    pub panel_file: String,
    pub checksum_sha256: String,
    pub created_unix: u64,
}
