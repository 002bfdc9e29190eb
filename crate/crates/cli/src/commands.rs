use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mortclust::hmd::{
    build_panel, display_name, find_lifetable_file, panel_csv_bytes, parse_lifetable_file,
    read_panel_csv, sha256_hex, DataSelection, ManifestCountry, PanelManifest,
};
use mortclust::lifetable::{transform, MortalityIndex, MortalityPanel};
use mortclust::pipelines::{
    consensus_from_reports, prepare, run_pipeline, PipelineName, PipelineRun, PipelineSpec,
    RunReport, Stage,
};
use mortclust::synthetic::{planted_panel, write_hmd_directory, PlantedSpec};
use mortclust::validity::{sweep, ValiditySweep};
use mortclust::Execution;

use crate::figures;
use crate::output::Staging;
use crate::CliError;

pub const PANEL_FILE: &str = "panel.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Core(e.into()))?;
    s.push('\n');
    Ok(s)
}

/// Read every selected country's life-table file and assemble the panel.
pub fn load_panel(data_dir: &Path, sel: &DataSelection) -> Result<(MortalityPanel, Vec<ManifestCountry>), CliError> {
    let mut codes = sel.country_codes.clone();
    codes.sort();
    codes.dedup();
    let mut missing = Vec::new();
    let mut files = BTreeMap::new();
    let mut sources = Vec::new();
    for code in &codes {
        let Some(path) = find_lifetable_file(data_dir, code) else {
            missing.push(format!("{code}: no {code}.bltper_5x1.txt under {}", data_dir.display()));
            continue;
        };
        let bytes = fs::read(&path).map_err(|e| CliError::Core(e.into()))?;
        let parsed = parse_lifetable_file(&bytes, code, Some(sel.years())).map_err(|e| {
            CliError::Core(mortclust::Error::Country {
                country: code.clone(),
                source: Box::new(e),
            })
        })?;
        for w in &parsed.warnings {
            log::warn!("{code} line {} ({}): {}", w.line, w.year, w.message);
        }
        let rel = path.strip_prefix(data_dir).unwrap_or(&path);
        sources.push(ManifestCountry {
            code: code.clone(),
            name: display_name(code).to_string(),
            source_file: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
            title: parsed.title.clone(),
        });
        files.insert(code.clone(), parsed);
    }
    if !missing.is_empty() {
        return Err(CliError::Core(mortclust::Error::Assembly { gaps: missing }));
    }
    let panel = build_panel(&files, sel).map_err(CliError::Core)?;
    let report = panel.identity_report();
    if report.lx_increases > 0 {
        log::warn!("{} life-table rows have increasing lx", report.lx_increases);
    }
    Ok((panel, sources))
}

pub fn ingest(data_dir: &Path, sel: &DataSelection, out: &Path) -> Result<PanelManifest, CliError> {
    let (panel, countries) = load_panel(data_dir, sel)?;
    let bytes = panel_csv_bytes(&panel).map_err(CliError::Core)?;
    let manifest = PanelManifest {
        selection: sel.clone(),
        population_variant: "both sexes combined (bltper_5x1)".into(),
        countries,
        years: panel.years().to_vec(),
        age_groups: panel.grid().labels(),
        panel_file: PANEL_FILE.into(),
        checksum_sha256: sha256_hex(&bytes),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    fs::create_dir_all(out).map_err(|e| CliError::Core(e.into()))?;
    let stage = Staging::new(out, "ingest")?;
    stage.write(PANEL_FILE, &bytes)?;
    stage.write(MANIFEST_FILE, json(&manifest)?)?;
    stage.commit_files()?;
    Ok(manifest)
}

/// Panel read back from its CSV, with the checksum of the file bytes.
pub fn read_panel(path: &Path) -> Result<(MortalityPanel, String), CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "panel {} not found; run `mortclust ingest` first or pass --panel",
            path.display()
        )));
    }
    let bytes = fs::read(path).map_err(|e| CliError::Core(e.into()))?;
    let panel = read_panel_csv(bytes.as_slice()).map_err(CliError::Core)?;
    Ok((panel, sha256_hex(&bytes)))
}

fn age_lower(panel: &MortalityPanel) -> Vec<f64> {
    panel.grid().intervals().iter().map(|i| f64::from(i.lower)).collect()
}

fn names(panel: &MortalityPanel) -> Vec<String> {
    panel.countries().iter().map(|c| display_name(c).to_string()).collect()
}

fn partition_csv(run: &PipelineRun, panel: &MortalityPanel) -> String {
    let c = &run.clustering;
    let mut out = String::from("country,name,cluster");
    if let Some(f) = &c.fuzzy {
        for g in 0..f.k() {
            let _ = write!(out, ",membership_{}", g + 1);
        }
    }
    out.push('\n');
    for (i, code) in panel.countries().iter().enumerate() {
        let _ = write!(out, "{code},{},{}", display_name(code), c.partition.labels()[i] + 1);
        if let Some(f) = &c.fuzzy {
            for u in f.row(i) {
                let _ = write!(out, ",{u:.6}");
            }
        }
        out.push('\n');
    }
    out
}

/// Figures appropriate to the pipeline, as (file name, SVG).
fn pipeline_figures(run: &PipelineRun, panel: &MortalityPanel) -> Vec<(String, String)> {
    let p = &run.clustering.partition;
    let names = names(panel);
    let ages = age_lower(panel);
    let mut figs = Vec::new();
    match &run.prepared.stage {
        Stage::HellingerWard { dstar, dendrogram } => {
            figs.push(("dendrogram.svg".into(), figures::dendrogram(dendrogram, &names, p)));
            figs.push(("dstar_bands.svg".into(), figures::dstar_bands(dstar, &ages, p)));
        }
        Stage::IlcKmeans { betas, .. } => {
            figs.push((
                "beta.svg".into(),
                figures::age_profiles(betas, &ages, p, "Lee-Carter beta by age (unit drift)", "beta"),
            ));
        }
        Stage::PcaFuzzy { .. } => {
            if let Some(f) = &run.clustering.fuzzy {
                figs.push(("membership.svg".into(), figures::membership_bars(&names, f, 0)));
            }
        }
        Stage::FuncKmeans { fits, .. } => {
            let years: Vec<f64> = panel.years().iter().map(|&y| f64::from(y)).collect();
            let fitted: Vec<Vec<f64>> = fits
                .iter()
                .map(|f| years.iter().map(|&t| f.evaluate(t)).collect())
                .collect();
            match transform(panel, MortalityIndex::E0, false) {
                Ok(e0) => figs.push(("e0.svg".into(), figures::e0_curves(&years, &e0, &fitted, p))),
                Err(e) => log::warn!("e0 figure skipped: {e}"),
            }
        }
    }
    match transform(panel, MortalityIndex::LogMx, false) {
        Ok(logm) => {
            let slots: Vec<(usize, String)> = [0u32, 45, 65, 80]
                .iter()
                .filter_map(|&age| panel.grid().index_of_age(age))
                .map(|a| (a, panel.grid().intervals()[a].label()))
                .collect();
            figs.push(("logmx_trends.svg".into(), figures::cluster_mean_trends(&logm, &slots, p)));
        }
        Err(e) => log::warn!("log mx trend figure skipped: {e}"),
    }
    figs
}

pub fn run_dir_name(spec: &PipelineSpec) -> String {
    format!("{}_k{}", spec.name.as_str().to_ascii_lowercase(), spec.k)
}

/// Run one pipeline and write its partition, report and figures into
/// `<out>/<pipeline>_k<k>/`.
pub fn cluster(
    panel: &MortalityPanel,
    panel_checksum: &str,
    spec: &PipelineSpec,
    config_checksum: Option<String>,
    out: &Path,
) -> Result<(RunReport, PathBuf), CliError> {
    let run = run_pipeline(panel, spec).map_err(CliError::Core)?;
    let report = RunReport::new(&run, panel_checksum, config_checksum);
    fs::create_dir_all(out).map_err(|e| CliError::Core(e.into()))?;
    let name = run_dir_name(spec);
    let stage = Staging::new(out, &name)?;
    stage.write("partition.csv", partition_csv(&run, panel))?;
    stage.write("report.json", json(&report)?)?;
    if let Stage::HellingerWard { dendrogram, .. } = &run.prepared.stage {
        stage.write("dendrogram.newick", dendrogram.to_newick() + "\n")?;
    }
    for (file, svg) in pipeline_figures(&run, panel) {
        stage.write(&file, svg)?;
    }
    let dir = stage.commit_dir(&name)?;
    Ok((report, dir))
}

pub fn sweep_pipeline(
    panel: &MortalityPanel,
    spec: &PipelineSpec,
    k_min: usize,
    k_max: usize,
    out: &Path,
) -> Result<(ValiditySweep, PathBuf), CliError> {
    let n = panel.countries().len();
    if k_min < 2 || k_min > k_max || k_max >= n {
        return Err(CliError::Usage(format!(
            "sweep range {k_min}..={k_max} invalid for {n} countries (need 2 <= kmin <= kmax <= {})",
            n.saturating_sub(1)
        )));
    }
    let prepared = prepare(panel, spec).map_err(CliError::Core)?;
    let result = sweep(&prepared, k_min, k_max, spec.execution).map_err(CliError::Core)?;
    fs::create_dir_all(out).map_err(|e| CliError::Core(e.into()))?;
    let name = format!("sweep_{}", spec.name.as_str().to_ascii_lowercase());
    let stage = Staging::new(out, &name)?;
    stage.write("sweep.csv", result.to_csv())?;
    stage.write("sweep.json", json(&result)?)?;
    for idx in result.scores.keys() {
        stage.write(&format!("{}.svg", idx.name()), figures::sweep_plot(&result, *idx))?;
    }
    if let Some(obj) = &result.objective {
        stage.write("objective.svg", figures::objective_plot(&result, obj))?;
    }
    let dir = stage.commit_dir(&name)?;
    Ok((result, dir))
}

pub fn consensus(report_paths: &[PathBuf], out: &Path) -> Result<PathBuf, CliError> {
    if report_paths.is_empty() {
        return Err(CliError::Usage("consensus needs at least one run report".into()));
    }
    let mut reports = Vec::new();
    for path in report_paths {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let report: RunReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{} is not a run report: {e}", path.display())))?;
        reports.push(report);
    }
    let graph = consensus_from_reports(&reports).map_err(|e| CliError::Usage(e.to_string()))?;
    let names: Vec<String> = graph.nodes.iter().map(|c| display_name(c).to_string()).collect();
    fs::create_dir_all(out).map_err(|e| CliError::Core(e.into()))?;
    let stage = Staging::new(out, "consensus")?;
    stage.write("consensus.graphml", graph.to_graphml())?;
    stage.write("consensus.json", json(&graph)?)?;
    stage.write("consensus.svg", figures::consensus_graph(&graph, &names))?;
    stage.commit_dir("consensus")
}

pub struct ReplicateOptions {
    pub seed: Option<u64>,
    pub execution: Execution,
    pub k_min: usize,
    pub k_max: usize,
}

/// Ingest, run every pipeline at its default k (plus Hellinger–Ward at
/// k = 2), sweep each pipeline, and build the consensus graph.
pub fn replicate(
    data_dir: &Path,
    sel: &DataSelection,
    out: &Path,
    specs: &[PipelineSpec],
    config_checksum: Option<String>,
    opts: &ReplicateOptions,
) -> Result<String, CliError> {
    let manifest = ingest(data_dir, sel, out)?;
    let (panel, checksum) = read_panel(&out.join(PANEL_FILE))?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "panel: {} countries, {}-{}, checksum {}",
        manifest.countries.len(),
        manifest.years.first().copied().unwrap_or_default(),
        manifest.years.last().copied().unwrap_or_default(),
        &checksum[..12]
    );
    let mut report_paths = Vec::new();
    for spec in specs {
        let mut spec = spec.clone();
        if let Some(seed) = opts.seed {
            spec.seed = seed;
        }
        spec.execution = opts.execution;
        let (report, dir) = cluster(&panel, &checksum, &spec, config_checksum.clone(), out)?;
        let _ = writeln!(summary, "{} k={}:", spec.name, spec.k);
        for (g, members) in report.clusters.iter().enumerate() {
            let names: Vec<&str> = members.iter().map(|c| display_name(c)).collect();
            let _ = writeln!(summary, "  cluster {}: {}", g + 1, names.join(", "));
        }
        report_paths.push(dir.join("report.json"));
        if spec.name == PipelineName::HellingerWard && spec.k != 2 {
            cluster(&panel, &checksum, &spec.clone().with_k(2), config_checksum.clone(), out)?;
        }
        let k_max = opts.k_max.min(panel.countries().len().saturating_sub(1));
        if k_max >= opts.k_min {
            let (s, _) = sweep_pipeline(&panel, &spec, opts.k_min, k_max, out)?;
            let picks: Vec<String> = s
                .selected
                .iter()
                .map(|(idx, k)| format!("{}={k}", idx.name()))
                .collect();
            let _ = writeln!(summary, "  sweep {}..{}: {}", opts.k_min, k_max, picks.join(" "));
        }
    }
    let dir = consensus(&report_paths, out)?;
    let _ = writeln!(summary, "consensus graph: {}", dir.display());
    Ok(summary)
}

pub fn synth(spec: &PlantedSpec, out: &Path) -> Result<(), CliError> {
    let planted = planted_panel(spec).map_err(CliError::Core)?;
    fs::create_dir_all(out).map_err(|e| CliError::Core(e.into()))?;
    let stage = Staging::new(out, "synth")?;
    write_hmd_directory(&planted.panel, stage.dir()).map_err(CliError::Core)?;
    let mut truth = String::from("country,group\n");
    for (code, g) in planted.panel.countries().iter().zip(&planted.truth) {
        let _ = writeln!(truth, "{code},{}", g + 1);
    }
    stage.write("truth.csv", truth)?;
    stage.commit_files()
}
