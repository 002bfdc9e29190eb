//! The four country-clustering pipelines, run reports, and the cross-method
//! consensus graph.
//!
//! Each pipeline splits into a k-independent preparation stage (features or
//! dissimilarities) and a clustering stage, so sweeps over k reuse the
//! prepared features.

mod consensus;
mod layout;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    cut_dendrogram, fuzzy_cmeans, harden, hellinger_distance_matrix, kmeans, ward_agglomerate,
    Dendrogram, DistanceMatrix, FcmConfig, FuzzyPartition, HardPartition, KMeansConfig,
    DEFAULT_SEED,
};
use crate::error::{Error, Result};
use crate::exec::{try_map_indices, Execution};
use crate::features::{fit_bspline, pca, standardize_columns, PcaResult, SplineFit};
use crate::hmd::display_name;
use crate::leecarter::{fit_lee_carter, rescale_unit_drift, LeeCarterFit};
use crate::lifetable::{transform, IndexArray, MortalityIndex, MortalityPanel};
use crate::validity::{
    calinski_harabasz, calinski_harabasz_from_distances, fuzzy_silhouette, partition_coefficient,
    point_biserial, silhouette, xie_beni, KEvaluation, SweepTarget, ValidityIndex,
};

pub use consensus::{consensus, consensus_from_reports, ConsensusEdge, ConsensusGraph, LAYOUT_SEED};
pub use layout::fr_layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PipelineName {
    HellingerWard,
    IlcKmeans,
    PcaFuzzy,
    FuncKmeans,
}

impl PipelineName {
    pub const ALL: [PipelineName; 4] = [
        PipelineName::HellingerWard,
        PipelineName::IlcKmeans,
        PipelineName::PcaFuzzy,
        PipelineName::FuncKmeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineName::HellingerWard => "HELLINGER_WARD",
            PipelineName::IlcKmeans => "ILC_KMEANS",
            PipelineName::PcaFuzzy => "PCA_FUZZY",
            PipelineName::FuncKmeans => "FUNC_KMEANS",
        }
    }

    /// Number of clusters used for the published partitions.
    pub fn default_k(self) -> usize {
        match self {
            PipelineName::HellingerWard => 3,
            _ => 2,
        }
    }

    pub fn is_fuzzy(self) -> bool {
        self == PipelineName::PcaFuzzy
    }
}

impl fmt::Display for PipelineName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        PipelineName::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown pipeline '{s}' (expected one of HELLINGER_WARD, ILC_KMEANS, PCA_FUZZY, FUNC_KMEANS)"
                ))
            })
    }
}

/// Pipeline choice with its hyperparameters. Parameters a pipeline does not
/// use are carried but ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: PipelineName,
    pub k: usize,
    /// Principal components kept by PCA_FUZZY.
    pub n_components: usize,
    /// B-spline basis size for FUNC_KMEANS.
    pub n_basis: usize,
    pub degree: usize,
    /// Fuzziness exponent for PCA_FUZZY.
    pub m: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tolerance: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl PipelineSpec {
    pub fn new(name: PipelineName) -> Self {
        PipelineSpec {
            name,
            k: name.default_k(),
            n_components: 6,
            n_basis: 25,
            degree: 3,
            m: 2.0,
            restarts: if name.is_fuzzy() { 20 } else { 50 },
            seed: DEFAULT_SEED,
            max_iter: if name.is_fuzzy() { 500 } else { 300 },
            tolerance: 1e-8,
            execution: Execution::default(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    fn kmeans_config(&self, k: usize) -> KMeansConfig {
        KMeansConfig {
            k,
            restarts: self.restarts,
            seed: self.seed,
            max_iter: self.max_iter,
            execution: self.execution,
        }
    }

    fn fcm_config(&self, k: usize) -> FcmConfig {
        FcmConfig {
            k,
            m: self.m,
            restarts: self.restarts,
            seed: self.seed,
            max_iter: self.max_iter,
            tolerance: self.tolerance,
            execution: self.execution,
        }
    }
}

/// k-independent output of a pipeline's feature stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    HellingerWard {
        dstar: IndexArray,
        dendrogram: Dendrogram,
    },
    IlcKmeans {
        /// Unit-drift fits, one per country.
        fits: Vec<LeeCarterFit>,
        betas: DMatrix<f64>,
    },
    PcaFuzzy {
        pca: PcaResult,
        /// Number of columns of the flattened logit-qx matrix.
        n_features: usize,
    },
    FuncKmeans {
        fits: Vec<SplineFit>,
        coefficients: DMatrix<f64>,
    },
}

/// Features and dissimilarities for one pipeline, ready to cluster at any k.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPipeline {
    pub spec: PipelineSpec,
    pub countries: Vec<String>,
    pub stage: Stage,
    /// Dissimilarities the validity indices use: Hellinger for
    /// HELLINGER_WARD, Euclidean on the clustered features otherwise.
    pub distances: DistanceMatrix,
}

/// Partition at one k, with cluster numbers ordered by each cluster's
/// alphabetically first country code.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    pub partition: HardPartition,
    pub fuzzy: Option<FuzzyPartition>,
    pub centers: Option<Vec<Vec<f64>>>,
    /// WSS for k-means, J_m for fuzzy c-means, none for Ward.
    pub objective: Option<f64>,
    pub converged: Option<bool>,
    pub metrics: BTreeMap<ValidityIndex, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub prepared: PreparedPipeline,
    pub clustering: Clustering,
}

fn per_country<T: Send>(
    countries: &[String],
    exec: Execution,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    try_map_indices(exec, countries.len(), |c| {
        f(c).map_err(|e| Error::Country {
            country: countries[c].clone(),
            source: Box::new(e),
        })
    })
}

fn stack_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Country × (age × year) matrix, age varying slowest.
pub fn flatten_age_major(arr: &IndexArray) -> DMatrix<f64> {
    let (nc, ny, na) = arr.dims();
    DMatrix::from_fn(nc, na * ny, |c, col| arr.get(c, col % ny, col / ny))
}

/// Age × year matrix of one country.
pub fn country_matrix(arr: &IndexArray, country: usize) -> DMatrix<f64> {
    let (_, ny, na) = arr.dims();
    DMatrix::from_fn(na, ny, |a, t| arr.get(country, t, a))
}

pub fn prepare(panel: &MortalityPanel, spec: &PipelineSpec) -> Result<PreparedPipeline> {
    let countries = panel.countries().to_vec();
    let exec = spec.execution;
    let (stage, distances) = match spec.name {
        PipelineName::HellingerWard => {
            let dstar = transform(panel, MortalityIndex::DStar, false)?;
            let distances = hellinger_distance_matrix(&dstar, exec)?;
            let dendrogram = ward_agglomerate(&distances)?;
            (Stage::HellingerWard { dstar, dendrogram }, distances)
        }
        PipelineName::IlcKmeans => {
            let logm = transform(panel, MortalityIndex::LogMx, false)?;
            let fits = per_country(&countries, exec, |c| {
                rescale_unit_drift(&fit_lee_carter(&country_matrix(&logm, c))?)
            })?;
            let betas = stack_rows(&fits.iter().map(|f| f.beta.clone()).collect::<Vec<_>>());
            let distances = DistanceMatrix::euclidean(countries.clone(), &betas)?;
            (Stage::IlcKmeans { fits, betas }, distances)
        }
        PipelineName::PcaFuzzy => {
            let lq = transform(panel, MortalityIndex::LogitQx, true)?;
            let x = flatten_age_major(&lq);
            let z = standardize_columns(&x)?;
            let p = pca(&z.matrix, spec.n_components)?;
            let distances = DistanceMatrix::euclidean(countries.clone(), &p.scores)?;
            (
                Stage::PcaFuzzy {
                    pca: p,
                    n_features: x.ncols(),
                },
                distances,
            )
        }
        PipelineName::FuncKmeans => {
            let e0 = transform(panel, MortalityIndex::E0, false)?;
            let times: Vec<f64> = panel.years().iter().map(|&y| f64::from(y)).collect();
            let fits = per_country(&countries, exec, |c| {
                fit_bspline(&times, e0.country_block(c), spec.n_basis, spec.degree)
            })?;
            let coefficients =
                stack_rows(&fits.iter().map(|f| f.coefficients.clone()).collect::<Vec<_>>());
            let distances = DistanceMatrix::euclidean(countries.clone(), &coefficients)?;
            (Stage::FuncKmeans { fits, coefficients }, distances)
        }
    };
    Ok(PreparedPipeline {
        spec: spec.clone(),
        countries,
        stage,
        distances,
    })
}

/// Order fuzzy clusters by the alphabetically first country whose largest
/// membership falls in them; clusters winning no country go last.
fn canonical_fuzzy_order(f: &FuzzyPartition, names: &[String]) -> Vec<usize> {
    let hard_raw: Vec<usize> = (0..f.n())
        .map(|i| {
            let row = f.row(i);
            (1..row.len()).fold(0, |b, g| if row[g] > row[b] { g } else { b })
        })
        .collect();
    let mut keys: Vec<(bool, String, usize)> = (0..f.k())
        .map(|g| {
            let first = (0..f.n())
                .filter(|&i| hard_raw[i] == g)
                .map(|i| names[i].clone())
                .min();
            (first.is_none(), first.unwrap_or_default(), g)
        })
        .collect();
    keys.sort();
    keys.into_iter().map(|(_, _, g)| g).collect()
}

fn reorder<T: Clone>(items: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&g| items[g].clone()).collect()
}

fn insert_metric(metrics: &mut BTreeMap<ValidityIndex, f64>, idx: ValidityIndex, value: Result<f64>) {
    match value {
        Ok(v) if v.is_finite() => {
            metrics.insert(idx, v);
        }
        Ok(v) => log::warn!("{} = {v} is not finite; omitted", idx.name()),
        Err(e) => log::warn!("{} undefined: {e}", idx.name()),
    }
}

impl PreparedPipeline {
    fn features(&self) -> Option<&DMatrix<f64>> {
        match &self.stage {
            Stage::HellingerWard { .. } => None,
            Stage::IlcKmeans { betas, .. } => Some(betas),
            Stage::PcaFuzzy { pca, .. } => Some(&pca.scores),
            Stage::FuncKmeans { coefficients, .. } => Some(coefficients),
        }
    }

    fn hard_metrics(&self, p: &HardPartition) -> BTreeMap<ValidityIndex, f64> {
        let mut metrics = BTreeMap::new();
        if p.k() < 2 {
            return metrics;
        }
        let d = &self.distances;
        insert_metric(&mut metrics, ValidityIndex::Silhouette, silhouette(d, p));
        let ch = match self.features() {
            Some(x) => calinski_harabasz(x, p),
            None => calinski_harabasz_from_distances(d, p),
        };
        insert_metric(&mut metrics, ValidityIndex::CalinskiHarabasz, ch.map(|s| s.value));
        insert_metric(&mut metrics, ValidityIndex::PointBiserial, point_biserial(d, p));
        metrics
    }

    /// Cluster the prepared features into `k` groups.
    pub fn cluster(&self, k: usize) -> Result<Clustering> {
        let n = self.countries.len();
        if k == 0 || k > n {
            return Err(Error::domain(format!("k = {k} outside 1..={n}")));
        }
        let names = &self.countries;
        match &self.stage {
            Stage::HellingerWard { dendrogram, .. } => {
                let (partition, _) = cut_dendrogram(dendrogram, k)?.canonicalize(names);
                let metrics = self.hard_metrics(&partition);
                Ok(Clustering {
                    k,
                    partition,
                    fuzzy: None,
                    centers: None,
                    objective: None,
                    converged: None,
                    metrics,
                })
            }
            Stage::IlcKmeans { betas: x, .. } | Stage::FuncKmeans { coefficients: x, .. } => {
                let r = kmeans(x, &self.spec.kmeans_config(k))?;
                let (partition, order) = r.partition.canonicalize(names);
                let metrics = self.hard_metrics(&partition);
                Ok(Clustering {
                    k,
                    partition,
                    fuzzy: None,
                    centers: Some(reorder(&r.centroids, &order)),
                    objective: Some(r.wss),
                    converged: None,
                    metrics,
                })
            }
            Stage::PcaFuzzy { pca, .. } => {
                let r = fuzzy_cmeans(&pca.scores, &self.spec.fcm_config(k))?;
                let order = canonical_fuzzy_order(&r.partition, names);
                let fuzzy = r.partition.permute_clusters(&order);
                let centers = reorder(&r.centers, &order);
                let partition = harden(&fuzzy);
                if partition.k() < k {
                    log::warn!("hardening left {} of {k} clusters non-empty", partition.k());
                }
                let mut metrics = BTreeMap::new();
                if k >= 2 {
                    metrics.insert(ValidityIndex::PartitionCoefficient, partition_coefficient(&fuzzy));
                    insert_metric(
                        &mut metrics,
                        ValidityIndex::FuzzySilhouette,
                        fuzzy_silhouette(&self.distances, &fuzzy, 1.0),
                    );
                    insert_metric(
                        &mut metrics,
                        ValidityIndex::XieBeni,
                        xie_beni(&pca.scores, &fuzzy, &centers),
                    );
                }
                Ok(Clustering {
                    k,
                    partition,
                    fuzzy: Some(fuzzy),
                    centers: Some(centers),
                    objective: Some(r.objective),
                    converged: Some(r.converged),
                    metrics,
                })
            }
        }
    }
}

impl SweepTarget for PreparedPipeline {
    fn n_entities(&self) -> usize {
        self.countries.len()
    }

    fn evaluate(&self, k: usize) -> Result<KEvaluation> {
        let c = self.cluster(k)?;
        Ok(KEvaluation {
            scores: c.metrics,
            objective: c.objective,
        })
    }
}

/// Prepare and cluster at `spec.k`.
pub fn run_pipeline(panel: &MortalityPanel, spec: &PipelineSpec) -> Result<PipelineRun> {
    let prepared = prepare(panel, spec)?;
    let clustering = prepared.cluster(spec.k)?;
    Ok(PipelineRun {
        prepared,
        clustering,
    })
}

pub fn run_hellinger_ward(panel: &MortalityPanel, k: usize) -> Result<PipelineRun> {
    run_pipeline(panel, &PipelineSpec::new(PipelineName::HellingerWard).with_k(k))
}

pub fn run_ilc_kmeans(panel: &MortalityPanel, k: usize) -> Result<PipelineRun> {
    run_pipeline(panel, &PipelineSpec::new(PipelineName::IlcKmeans).with_k(k))
}

pub fn run_pca_fuzzy(panel: &MortalityPanel, k: usize) -> Result<PipelineRun> {
    run_pipeline(panel, &PipelineSpec::new(PipelineName::PcaFuzzy).with_k(k))
}

pub fn run_func_kmeans(panel: &MortalityPanel, k: usize) -> Result<PipelineRun> {
    run_pipeline(panel, &PipelineSpec::new(PipelineName::FuncKmeans).with_k(k))
}

/// JSON summary of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub spec: PipelineSpec,
    pub panel_checksum_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_checksum_sha256: Option<String>,
    pub countries: Vec<String>,
    pub country_names: Vec<String>,
    pub k: usize,
    /// Cluster number (0-based) of each country.
    pub labels: Vec<usize>,
    pub clusters: Vec<Vec<String>>,
    /// Country × cluster memberships for fuzzy pipelines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memberships: Option<Vec<Vec<f64>>>,
    pub metrics: BTreeMap<ValidityIndex, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Pipeline-specific diagnostics, e.g. PCA explained variance.
    pub diagnostics: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(run: &PipelineRun, panel_checksum: &str, config_checksum: Option<String>) -> Self {
        let c = &run.clustering;
        let countries = run.prepared.countries.clone();
        let clusters = (0..c.partition.k())
            .map(|g| {
                c.partition
                    .members(g)
                    .into_iter()
                    .map(|i| countries[i].clone())
                    .collect()
            })
            .collect();
        let memberships = c
            .fuzzy
            .as_ref()
            .map(|f| (0..f.n()).map(|i| f.row(i).to_vec()).collect());
        let mut diagnostics = BTreeMap::new();
        match &run.prepared.stage {
            Stage::HellingerWard { dendrogram, .. } => {
                if let Some(m) = dendrogram.merges.last() {
                    diagnostics.insert("max_merge_height".into(), m.height);
                }
            }
            Stage::IlcKmeans { fits, .. } => {
                let mean = fits.iter().map(LeeCarterFit::explained_fraction).sum::<f64>()
                    / fits.len() as f64;
                diagnostics.insert("mean_lc_explained_fraction".into(), mean);
            }
            Stage::PcaFuzzy { pca, n_features } => {
                diagnostics.insert("pca_cumulative_explained".into(), pca.cumulative_explained());
                diagnostics.insert("n_features".into(), *n_features as f64);
            }
            Stage::FuncKmeans { fits, .. } => {
                diagnostics.insert("n_basis".into(), fits.first().map_or(0, SplineFit::n_basis) as f64);
            }
        }
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            spec: run.prepared.spec.clone(),
            panel_checksum_sha256: panel_checksum.to_string(),
            config_checksum_sha256: config_checksum,
            country_names: countries.iter().map(|c| display_name(c).to_string()).collect(),
            countries,
            k: c.partition.k(),
            labels: c.partition.labels().to_vec(),
            clusters,
            memberships,
            metrics: c.metrics.clone(),
            objective: c.objective,
            converged: c.converged,
            diagnostics,
        }
    }

    pub fn partition(&self) -> Result<HardPartition> {
        HardPartition::new(self.labels.clone(), self.k)
    }
}
