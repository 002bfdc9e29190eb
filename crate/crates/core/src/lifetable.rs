//! Life-table quantities, the abridged age grid, the dense country × year ×
//! age panel, and the index transforms consumed by the clustering pipelines.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional life-table radix.
pub const RADIX: f64 = 100_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalWidth {
    Years(u32),
    Open,
}

/// Age interval `[lower, lower + width)`, or `[lower, ∞)` when open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgeInterval {
    pub lower: u32,
    pub width: IntervalWidth,
}

impl AgeInterval {
    pub fn closed(lower: u32, width: u32) -> Self {
        AgeInterval {
            lower,
            width: IntervalWidth::Years(width),
        }
    }

    pub fn open(lower: u32) -> Self {
        AgeInterval {
            lower,
            width: IntervalWidth::Open,
        }
    }

    pub fn is_open(&self) -> bool {
        self.width == IntervalWidth::Open
    }

    /// Width in years; `None` for the open interval.
    pub fn years(&self) -> Option<u32> {
        match self.width {
            IntervalWidth::Years(n) => Some(n),
            IntervalWidth::Open => None,
        }
    }

    /// Parse an HMD age token: `"0"`, `"1-4"`, `"110+"`.
    pub fn parse(token: &str) -> Option<Self> {
        if let Some(lower) = token.strip_suffix('+') {
            return lower.parse().ok().map(AgeInterval::open);
        }
        if let Some((lo, hi)) = token.split_once('-') {
            let lo: u32 = lo.parse().ok()?;
            let hi: u32 = hi.parse().ok()?;
            return (hi >= lo).then(|| AgeInterval::closed(lo, hi - lo + 1));
        }
        token.parse().ok().map(|lower| AgeInterval::closed(lower, 1))
    }

    pub fn label(&self) -> String {
        match self.width {
            IntervalWidth::Open => format!("{}+", self.lower),
            IntervalWidth::Years(1) => self.lower.to_string(),
            IntervalWidth::Years(n) => format!("{}-{}", self.lower, self.lower + n - 1),
        }
    }
}

impl fmt::Display for AgeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Contiguous age intervals starting at `[0, 1)` and ending in a single
/// open interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeGrid {
    intervals: Vec<AgeInterval>,
}

impl AgeGrid {
    pub fn new(intervals: Vec<AgeInterval>) -> Result<Self> {
        let first = intervals
            .first()
            .ok_or_else(|| Error::domain("age grid is empty"))?;
        if *first != AgeInterval::closed(0, 1) {
            return Err(Error::domain(format!(
                "age grid must start with [0,1), got {first}"
            )));
        }
        for pair in intervals.windows(2) {
            let years = pair[0].years().ok_or_else(|| {
                Error::domain(format!("open interval {} is not last", pair[0]))
            })?;
            if pair[1].lower != pair[0].lower + years {
                return Err(Error::domain(format!(
                    "age intervals {} and {} are not contiguous",
                    pair[0], pair[1]
                )));
            }
        }
        if !intervals.last().is_some_and(AgeInterval::is_open) {
            return Err(Error::domain("age grid must end with an open interval"));
        }
        Ok(AgeGrid { intervals })
    }

    /// The HMD 5×1 grid: 0, 1-4, 5-9, …, 105-109, 110+ (24 groups).
    pub fn abridged() -> Self {
        let mut intervals = vec![AgeInterval::closed(0, 1), AgeInterval::closed(1, 4)];
        intervals.extend((1..22).map(|i| AgeInterval::closed(5 * i, 5)));
        intervals.push(AgeInterval::open(110));
        AgeGrid { intervals }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[AgeInterval] {
        &self.intervals
    }

    pub fn get(&self, index: usize) -> Option<&AgeInterval> {
        self.intervals.get(index)
    }

    pub fn labels(&self) -> Vec<String> {
        self.intervals.iter().map(AgeInterval::label).collect()
    }

    pub fn open_index(&self) -> usize {
        self.intervals.len() - 1
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        let interval = AgeInterval::parse(label)?;
        self.intervals.iter().position(|i| *i == interval)
    }

    pub fn index_of_age(&self, age: u32) -> Option<usize> {
        self.intervals.iter().position(|i| match i.width {
            IntervalWidth::Years(n) => age >= i.lower && age < i.lower + n,
            IntervalWidth::Open => age >= i.lower,
        })
    }
}

/// Numeric columns of one life-table row.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LifeTableValues {
    pub mx: f64,
    pub qx: f64,
    pub ax: f64,
    pub lx: f64,
    pub dx: f64,
    /// `nLx`, person-years lived in the interval.
    pub person_years: f64,
    /// `Tx`, person-years lived above age x.
    pub tx: f64,
    pub ex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTableRow {
    pub country: String,
    pub year: i32,
    pub age_index: usize,
    pub values: LifeTableValues,
}

/// Result of [`qx_from_mx`]; `capped` is set when the formula exceeded 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeathProbability {
    pub value: f64,
    pub capped: bool,
}

/// Convert a central death rate to a death probability under the
/// constant-rate-within-interval assumption: `n·m / (1 + (n − a)·m)`.
pub fn qx_from_mx(mx: f64, width: IntervalWidth, ax: f64) -> Result<DeathProbability> {
    let n = match width {
        IntervalWidth::Years(n) if n > 0 => f64::from(n),
        IntervalWidth::Years(_) => return Err(Error::domain("interval width must be positive")),
        IntervalWidth::Open => {
            return Err(Error::domain("qx_from_mx is undefined for the open interval"))
        }
    };
    if !(mx >= 0.0) {
        return Err(Error::domain(format!("mx must be nonnegative, got {mx}")));
    }
    if !(0.0..=n).contains(&ax) {
        return Err(Error::domain(format!("ax = {ax} outside [0, {n}]")));
    }
    if mx.is_infinite() {
        let limit = n / (n - ax);
        return Ok(DeathProbability {
            value: limit.min(1.0),
            capped: limit >= 1.0,
        });
    }
    let q = n * mx / (1.0 + (n - ax) * mx);
    if q >= 1.0 {
        log::warn!("qx_from_mx: n={n}, ax={ax}, mx={mx} gives qx={q}; capped at 1");
        Ok(DeathProbability {
            value: 1.0,
            capped: true,
        })
    } else {
        Ok(DeathProbability {
            value: q,
            capped: false,
        })
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn inverse_logit(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Dense, immutable country × year × age panel of life tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityPanel {
    countries: Vec<String>,
    years: Vec<i32>,
    grid: AgeGrid,
    cells: Vec<LifeTableValues>,
}

impl MortalityPanel {
    /// `cells` are laid out country-major, then year, then age.
    pub fn new(
        countries: Vec<String>,
        years: Vec<i32>,
        grid: AgeGrid,
        cells: Vec<LifeTableValues>,
    ) -> Result<Self> {
        let expected = countries.len() * years.len() * grid.len();
        if cells.len() != expected {
            return Err(Error::domain(format!(
                "panel has {} cells, expected {expected}",
                cells.len()
            )));
        }
        if countries.is_empty() || years.is_empty() {
            return Err(Error::domain("panel needs at least one country and one year"));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("panel years must be strictly increasing"));
        }
        let mut sorted = countries.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != countries.len() {
            return Err(Error::domain("duplicate country in panel"));
        }
        let panel = MortalityPanel {
            countries,
            years,
            grid,
            cells,
        };
        for c in 0..panel.countries.len() {
            for t in 0..panel.years.len() {
                for a in 0..panel.grid.len() {
                    let v = panel.cell(c, t, a);
                    let ok = [v.mx, v.qx, v.ax, v.lx, v.dx, v.person_years, v.tx, v.ex]
                        .iter()
                        .all(|x| x.is_finite())
                        && v.mx >= 0.0
                        && (0.0..=1.0).contains(&v.qx)
                        && v.ex >= 0.0;
                    if !ok {
                        return Err(Error::domain(format!(
                            "invalid life-table values for {} {} age {}: {v:?}",
                            panel.countries[c],
                            panel.years[t],
                            panel.grid.intervals[a]
                        )));
                    }
                }
            }
        }
        Ok(panel)
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    /// (countries, years, age groups)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.countries.len(), self.years.len(), self.grid.len())
    }

    pub fn country_index(&self, country: &str) -> Result<usize> {
        self.countries
            .iter()
            .position(|c| c == country)
            .ok_or_else(|| Error::Lookup {
                what: "country",
                key: country.to_string(),
            })
    }

    pub fn year_index(&self, year: i32) -> Result<usize> {
        self.years.binary_search(&year).map_err(|_| Error::Lookup {
            what: "year",
            key: year.to_string(),
        })
    }

    #[inline]
    pub fn cell(&self, country: usize, year: usize, age: usize) -> &LifeTableValues {
        let (_, ny, na) = self.dims();
        &self.cells[(country * ny + year) * na + age]
    }

    /// All age rows of one (country, year) table.
    pub fn table(&self, country: usize, year: usize) -> &[LifeTableValues] {
        let (_, ny, na) = self.dims();
        let start = (country * ny + year) * na;
        &self.cells[start..start + na]
    }

    pub fn rows(&self) -> impl Iterator<Item = LifeTableRow> + '_ {
        let (nc, ny, na) = self.dims();
        (0..nc).flat_map(move |c| {
            (0..ny).flat_map(move |t| {
                (0..na).map(move |a| LifeTableRow {
                    country: self.countries[c].clone(),
                    year: self.years[t],
                    age_index: a,
                    values: *self.cell(c, t, a),
                })
            })
        })
    }

    /// `dx / l0` per age group for one (country, year).
    pub fn normalized_death_distribution(&self, country: &str, year: i32) -> Result<Vec<f64>> {
        let c = self.country_index(country)?;
        let t = self.year_index(year)?;
        Ok(death_distribution(self.table(c, t)))
    }

    /// Largest deviations from the life-table identities, for auditing
    /// published (rounded) columns.
    pub fn identity_report(&self) -> IdentityReport {
        let mut report = IdentityReport::default();
        let (nc, ny, na) = self.dims();
        for c in 0..nc {
            for t in 0..ny {
                let table = self.table(c, t);
                report.max_radix_deviation =
                    report.max_radix_deviation.max((table[0].lx - RADIX).abs());
                let mut suffix = 0.0;
                for a in (0..na).rev() {
                    let v = &table[a];
                    suffix += v.person_years;
                    report.max_tx_deviation = report.max_tx_deviation.max((suffix - v.tx).abs());
                    if a + 1 < na {
                        let next = table[a + 1].lx;
                        report.max_dx_deviation =
                            report.max_dx_deviation.max((v.lx - next - v.dx).abs());
                        if next > v.lx {
                            report.lx_increases += 1;
                        }
                    }
                    if v.lx > 0.0 {
                        report.max_ex_deviation =
                            report.max_ex_deviation.max((v.tx / v.lx - v.ex).abs());
                    }
                }
                if (table[na - 1].qx - 1.0).abs() > 1e-12 {
                    report.open_qx_not_one += 1;
                }
            }
        }
        report
    }
}

fn death_distribution(table: &[LifeTableValues]) -> Vec<f64> {
    let l0 = table[0].lx;
    table.iter().map(|v| v.dx / l0).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityReport {
    pub max_radix_deviation: f64,
    pub max_dx_deviation: f64,
    pub max_tx_deviation: f64,
    pub max_ex_deviation: f64,
    pub lx_increases: usize,
    pub open_qx_not_one: usize,
}

/// Mortality index extracted from a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MortalityIndex {
    LogMx,
    LogitQx,
    DStar,
    E0,
}

impl MortalityIndex {
    fn name(self) -> &'static str {
        match self {
            MortalityIndex::LogMx => "log mx",
            MortalityIndex::LogitQx => "logit qx",
            MortalityIndex::DStar => "d*",
            MortalityIndex::E0 => "e0",
        }
    }
}

/// Country × year × age array of a transformed index. For `E0` the age axis
/// has the single entry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexArray {
    pub countries: Vec<String>,
    pub years: Vec<i32>,
    /// Panel age indices retained, in order.
    pub ages: Vec<usize>,
    values: Vec<f64>,
}

impl IndexArray {
    pub fn new(
        countries: Vec<String>,
        years: Vec<i32>,
        ages: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != countries.len() * years.len() * ages.len() {
            return Err(Error::domain("index array shape mismatch"));
        }
        Ok(IndexArray {
            countries,
            years,
            ages,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.countries.len(), self.years.len(), self.ages.len())
    }

    #[inline]
    pub fn get(&self, country: usize, year: usize, age: usize) -> f64 {
        let (_, ny, na) = self.dims();
        self.values[(country * ny + year) * na + age]
    }

    /// Age vector for one (country, year).
    pub fn slice(&self, country: usize, year: usize) -> &[f64] {
        let (_, ny, na) = self.dims();
        let start = (country * ny + year) * na;
        &self.values[start..start + na]
    }

    /// All values of one country, year-major.
    pub fn country_block(&self, country: usize) -> &[f64] {
        let (_, ny, na) = self.dims();
        &self.values[country * ny * na..(country + 1) * ny * na]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Extract a mortality index from the panel. With `exclude_open` the open
/// age group is dropped before the transform is applied. Values outside the
/// transform's domain raise [`Error::TransformDomain`]; nothing is clamped.
pub fn transform(
    panel: &MortalityPanel,
    index: MortalityIndex,
    exclude_open: bool,
) -> Result<IndexArray> {
    let (nc, ny, na) = panel.dims();
    let ages: Vec<usize> = match index {
        MortalityIndex::E0 => vec![0],
        _ if exclude_open => (0..na).filter(|&a| a != panel.grid.open_index()).collect(),
        _ => (0..na).collect(),
    };
    let mut values = Vec::with_capacity(nc * ny * ages.len());
    for c in 0..nc {
        for t in 0..ny {
            let table = panel.table(c, t);
            let dstar = matches!(index, MortalityIndex::DStar).then(|| death_distribution(table));
            for &a in &ages {
                let v = &table[a];
                let (raw, out) = match index {
                    MortalityIndex::LogMx => (v.mx, v.mx.ln()),
                    MortalityIndex::LogitQx => (
                        v.qx,
                        if v.qx > 0.0 && v.qx < 1.0 {
                            logit(v.qx)
                        } else {
                            f64::NAN
                        },
                    ),
                    MortalityIndex::DStar => {
                        let d = dstar.as_ref().map_or(f64::NAN, |d| d[a]);
                        (d, if d >= 0.0 { d } else { f64::NAN })
                    }
                    MortalityIndex::E0 => (v.ex, v.ex),
                };
                if !out.is_finite() {
                    return Err(Error::TransformDomain {
                        index: index.name(),
                        country: panel.countries[c].clone(),
                        year: panel.years[t],
                        age: panel.grid.intervals[a].label(),
                        value: raw,
                    });
                }
                values.push(out);
            }
        }
    }
    IndexArray::new(panel.countries.clone(), panel.years.clone(), ages, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Single-country, single-year panel with the given lx column (open
    /// group absorbs the remainder).
    fn panel_from_lx(lx: &[f64]) -> MortalityPanel {
        let grid = AgeGrid::abridged();
        let cells = lx
            .iter()
            .enumerate()
            .map(|(a, &l)| {
                let next = lx.get(a + 1).copied().unwrap_or(0.0);
                LifeTableValues {
                    mx: 0.01,
                    qx: if a + 1 == lx.len() || l == 0.0 { 1.0 } else { (l - next) / l },
                    ax: 0.5,
                    lx: l,
                    dx: l - next,
                    person_years: 0.0,
                    tx: 0.0,
                    ex: 0.0,
                }
            })
            .collect();
        MortalityPanel::new(vec!["XX".into()], vec![2000], grid, cells).unwrap()
    }

    #[test]
    fn abridged_grid_shape() {
        let grid = AgeGrid::abridged();
        assert_eq!(grid.len(), 24);
        assert_eq!(grid.labels()[0], "0");
        assert_eq!(grid.labels()[1], "1-4");
        assert_eq!(grid.labels()[2], "5-9");
        assert_eq!(grid.labels()[22], "105-109");
        assert_eq!(grid.labels()[23], "110+");
        assert!(AgeGrid::new(grid.intervals().to_vec()).is_ok());
        assert_eq!(grid.index_of_age(47), Some(10));
        assert_eq!(grid.index_of_age(130), Some(23));
    }

    #[test]
    fn grid_rejects_gaps_and_misplaced_open() {
        let bad = vec![
            AgeInterval::closed(0, 1),
            AgeInterval::closed(2, 3),
            AgeInterval::open(5),
        ];
        assert!(AgeGrid::new(bad).is_err());
        let bad = vec![
            AgeInterval::closed(0, 1),
            AgeInterval::open(1),
            AgeInterval::open(1),
        ];
        assert!(AgeGrid::new(bad).is_err());
        assert!(AgeGrid::new(vec![AgeInterval::closed(0, 1)]).is_err());
    }

    #[test]
    fn age_token_round_trip() {
        for token in ["0", "1-4", "5-9", "105-109", "110+"] {
            assert_eq!(AgeInterval::parse(token).unwrap().label(), token);
        }
        assert!(AgeInterval::parse("9-5").is_none());
        assert!(AgeInterval::parse("abc").is_none());
    }

    #[test]
    fn qx_from_mx_examples() {
        assert_eq!(qx_from_mx(0.0, IntervalWidth::Years(5), 2.5).unwrap().value, 0.0);
        // 0.01 / 1.005
        let q = qx_from_mx(0.01, IntervalWidth::Years(1), 0.5).unwrap();
        assert!((q.value - 0.009_950_248_756_218_9).abs() < 1e-15);
        assert!(!q.capped);

        let q = qx_from_mx(f64::INFINITY, IntervalWidth::Years(5), 2.5).unwrap();
        assert_eq!(q.value, 1.0);
        assert!(q.capped);
        let q = qx_from_mx(1e9, IntervalWidth::Years(5), 2.5).unwrap();
        assert_eq!(q.value, 1.0);
        assert!(q.capped);
    }

    #[test]
    fn qx_from_mx_errors() {
        assert!(qx_from_mx(0.1, IntervalWidth::Open, 1.0).is_err());
        assert!(qx_from_mx(0.1, IntervalWidth::Years(5), 5.5).is_err());
        assert!(qx_from_mx(0.1, IntervalWidth::Years(5), -0.1).is_err());
        assert!(qx_from_mx(-0.1, IntervalWidth::Years(5), 1.0).is_err());
    }

    #[test]
    fn degenerate_death_mass() {
        let mut lx = vec![0.0; 24];
        lx[0] = RADIX;
        let p = panel_from_lx(&lx);
        let d = p.normalized_death_distribution("XX", 2000).unwrap();
        assert_eq!(d[0], 1.0);
        assert!(d[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_death_distribution() {
        let lx: Vec<f64> = (0..24).map(|k| RADIX * (1.0 - k as f64 / 24.0)).collect();
        let p = panel_from_lx(&lx);
        let d = p.normalized_death_distribution("XX", 2000).unwrap();
        for x in &d {
            assert!((x - 1.0 / 24.0).abs() < 1e-12);
        }
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.normalized_death_distribution("YY", 2000).is_err());
        assert!(p.normalized_death_distribution("XX", 1999).is_err());
    }

    #[test]
    fn transform_identity_points() {
        assert_eq!(logit(0.5), 0.0);
        assert_eq!(1.0f64.ln(), 0.0);
    }

    #[test]
    fn logit_excludes_open_group() {
        let lx: Vec<f64> = (0..24).map(|k| RADIX * (1.0 - k as f64 / 24.0)).collect();
        let p = panel_from_lx(&lx);
        let arr = transform(&p, MortalityIndex::LogitQx, true).unwrap();
        assert_eq!(arr.ages.len(), 23);
        let err = transform(&p, MortalityIndex::LogitQx, false).unwrap_err();
        match err {
            Error::TransformDomain { age, year, .. } => {
                assert_eq!(age, "110+");
                assert_eq!(year, 2000);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn log_mx_rejects_zero() {
        let lx: Vec<f64> = (0..24).map(|k| RADIX * (1.0 - k as f64 / 24.0)).collect();
        let mut cells = panel_from_lx(&lx).table(0, 0).to_vec();
        cells[3].mx = 0.0;
        let p = MortalityPanel::new(vec!["XX".into()], vec![2000], AgeGrid::abridged(), cells)
            .unwrap();
        assert!(matches!(
            transform(&p, MortalityIndex::LogMx, false),
            Err(Error::TransformDomain { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn qx_monotone_in_mx(
            mx in 0.0f64..5.0,
            delta in 1e-9f64..1.0,
            n in prop::sample::select(vec![1u32, 4, 5]),
            frac in 0.0f64..=1.0,
        ) {
            let ax = frac * f64::from(n);
            let w = IntervalWidth::Years(n);
            let lo = qx_from_mx(mx, w, ax).unwrap().value;
            let hi = qx_from_mx(mx + delta, w, ax).unwrap().value;
            prop_assert!(hi >= lo);
            prop_assert!((0.0..=1.0).contains(&lo));
        }

        #[test]
        fn logit_round_trip(q in 1e-6f64..(1.0 - 1e-6)) {
            prop_assert!((inverse_logit(logit(q)) - q).abs() < 1e-12);
        }
    }
}
