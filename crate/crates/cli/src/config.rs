//! TOML run configuration. Unknown keys are rejected; command-line flags
//! override values read here.
//!
//! ```toml
//! data_dir = "/data/hmd"
//! output_dir = "out"
//! seed = 20100
//!
//! [selection]
//! countries = ["FRATNP", "ITA"]
//! years = "1960:2010"
//!
//! [pipelines.PCA_FUZZY]
//! k = 2
//! n_components = 6
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mortclust::hmd::sha256_hex;
use mortclust::pipelines::{PipelineName, PipelineSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub pipelines: BTreeMap<String, PipelineOverrides>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub countries: Option<Vec<String>>,
    /// `"A:B"`, inclusive.
    pub years: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOverrides {
    pub k: Option<usize>,
    pub n_components: Option<usize>,
    pub n_basis: Option<usize>,
    pub degree: Option<usize>,
    pub m: Option<f64>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub tolerance: Option<f64>,
}

/// A parsed config and the checksum of its source text.
#[derive(Debug, Clone, Default)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub checksum: Option<String>,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(LoadedConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config = parse(&text)?;
        Ok(LoadedConfig {
            config,
            checksum: Some(sha256_hex(text.as_bytes())),
        })
    }

    /// Default spec for `name`, with config overrides, then the global seed.
    pub fn spec_for(&self, name: PipelineName) -> PipelineSpec {
        let mut spec = PipelineSpec::new(name);
        if let Some(seed) = self.config.seed {
            spec.seed = seed;
        }
        if let Some(o) = self.config.pipelines.get(name.as_str()) {
            spec.k = o.k.unwrap_or(spec.k);
            spec.n_components = o.n_components.unwrap_or(spec.n_components);
            spec.n_basis = o.n_basis.unwrap_or(spec.n_basis);
            spec.degree = o.degree.unwrap_or(spec.degree);
            spec.m = o.m.unwrap_or(spec.m);
            spec.restarts = o.restarts.unwrap_or(spec.restarts);
            spec.seed = o.seed.unwrap_or(spec.seed);
            spec.max_iter = o.max_iter.unwrap_or(spec.max_iter);
            spec.tolerance = o.tolerance.unwrap_or(spec.tolerance);
        }
        spec
    }
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    for key in config.pipelines.keys() {
        let name: PipelineName = key
            .parse()
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        if name.as_str() != key {
            return Err(CliError::Usage(format!(
                "invalid config: pipeline table must be named [pipelines.{}]",
                name.as_str()
            )));
        }
    }
    if let Some(y) = &config.selection.years {
        parse_years(y)?;
    }
    Ok(config)
}

/// `"1960:2010"` → `(1960, 2010)`.
pub fn parse_years(s: &str) -> Result<(i32, i32), CliError> {
    let bad = || CliError::Usage(format!("years must look like A:B, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: i32 = a.trim().parse().map_err(|_| bad())?;
    let b: i32 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(CliError::Usage(format!("year range {a}:{b} is empty")));
    }
    Ok((a, b))
}
