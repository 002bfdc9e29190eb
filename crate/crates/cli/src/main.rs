//! `mortclust`: ingest HMD life tables, run the clustering pipelines, sweep
//! cluster counts and build the consensus graph.

mod commands;
mod config;
mod figures;
mod output;
mod svg;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mortclust::hmd::{code_for_name, DataSelection};
use mortclust::pipelines::{PipelineName, PipelineSpec};
use mortclust::synthetic::PlantedSpec;
use mortclust::Execution;

use crate::config::{parse_years, LoadedConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or command usage (exit 2).
    Usage(String),
    Core(mortclust::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                mortclust::Error::Assembly { .. }
                | mortclust::Error::Domain(_)
                | mortclust::Error::Lookup { .. } => 2,
                e if e.is_numerical() => 4,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(mortclust::Error::Assembly { gaps }) => {
                writeln!(f, "panel assembly failed:")?;
                for g in gaps {
                    writeln!(f, "  {g}")?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "mortclust", version, about = "Cluster countries by HMD mortality experience")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Disable data-parallel execution.
    #[arg(long, global = true)]
    sequential: bool,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding HMD `<CODE>.bltper_5x1.txt` files.
    #[arg(long, env = "MORTCLUST_DATA")]
    data_dir: Option<PathBuf>,
    /// Comma-separated HMD codes or country names (default: the 30-country set).
    #[arg(long, value_delimiter = ',')]
    countries: Option<Vec<String>>,
    /// Inclusive year range, e.g. 1960:2010.
    #[arg(long)]
    years: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline: HELLINGER_WARD, ILC_KMEANS, PCA_FUZZY or FUNC_KMEANS.
    #[arg(long)]
    pipeline: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Panel CSV written by `ingest` (default: <out>/panel.csv).
    #[arg(long)]
    panel: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse life-table files into a canonical panel CSV and manifest.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one pipeline and write partition, report and figures.
    Cluster {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate validity indices over a range of cluster counts.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 2)]
        kmin: usize,
        #[arg(long, default_value_t = 8)]
        kmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the co-clustering graph from run reports.
    Consensus {
        /// `report.json` files written by `cluster`.
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ingest, run all four pipelines, sweep them and build the consensus.
    Replicate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2)]
        kmin: usize,
        #[arg(long, default_value_t = 8)]
        kmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic HMD-format corpus with planted country groups.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        groups: usize,
        #[arg(long, default_value_t = 5)]
        per_group: usize,
        #[arg(long, default_value = "1960:2010")]
        years: String,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
    },
}

fn out_dir(flag: Option<PathBuf>, cfg: &LoadedConfig) -> PathBuf {
    flag.or_else(|| cfg.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("mortclust-out"))
}

fn selection(data: &DataArgs, cfg: &LoadedConfig) -> Result<(PathBuf, DataSelection), CliError> {
    let data_dir = data
        .data_dir
        .clone()
        .or_else(|| cfg.config.data_dir.clone())
        .ok_or_else(|| CliError::Usage("no data directory: pass --data-dir or set MORTCLUST_DATA".into()))?;
    let mut sel = DataSelection::replication();
    if let Some(list) = data.countries.clone().or_else(|| cfg.config.selection.countries.clone()) {
        sel.country_codes = list
            .iter()
            .map(|c| code_for_name(c.trim()).map_or_else(|| c.trim().to_ascii_uppercase(), str::to_string))
            .filter(|c| !c.is_empty())
            .collect();
        if sel.country_codes.is_empty() {
            return Err(CliError::Usage("--countries is empty".into()));
        }
    }
    if let Some(y) = data.years.clone().or_else(|| cfg.config.selection.years.clone()) {
        (sel.year_min, sel.year_max) = parse_years(&y)?;
    }
    Ok((data_dir, sel))
}

fn spec(run: &RunArgs, cfg: &LoadedConfig, exec: Execution) -> Result<PipelineSpec, CliError> {
    let name: PipelineName = run.pipeline.parse().map_err(|e: mortclust::Error| CliError::Usage(e.to_string()))?;
    let mut spec = cfg.spec_for(name);
    if let Some(seed) = run.seed {
        spec.seed = seed;
    }
    spec.execution = exec;
    Ok(spec)
}

fn panel_path(run: &RunArgs, out: &Path) -> PathBuf {
    run.panel.clone().unwrap_or_else(|| out.join(commands::PANEL_FILE))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = LoadedConfig::load(cli.config.as_deref())?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Ingest { data, out } => {
            let (dir, sel) = selection(&data, &cfg)?;
            let out = out_dir(out, &cfg);
            let m = commands::ingest(&dir, &sel, &out)?;
            println!(
                "wrote {} ({} countries, {} years, sha256 {})",
                out.join(commands::PANEL_FILE).display(),
                m.countries.len(),
                m.years.len(),
                m.checksum_sha256
            );
        }
        Command::Cluster { run, k, out } => {
            let out = out_dir(out, &cfg);
            let mut spec = spec(&run, &cfg, exec)?;
            if let Some(k) = k {
                spec.k = k;
            }
            let (panel, checksum) = commands::read_panel(&panel_path(&run, &out))?;
            let (report, dir) = commands::cluster(&panel, &checksum, &spec, cfg.checksum.clone(), &out)?;
            for (g, members) in report.clusters.iter().enumerate() {
                println!("cluster {}: {}", g + 1, members.join(" "));
            }
            println!("wrote {}", dir.display());
        }
        Command::Sweep { run, kmin, kmax, out } => {
            let out = out_dir(out, &cfg);
            let spec = spec(&run, &cfg, exec)?;
            let (panel, _) = commands::read_panel(&panel_path(&run, &out))?;
            let (s, dir) = commands::sweep_pipeline(&panel, &spec, kmin, kmax, &out)?;
            for (idx, k) in &s.selected {
                println!("{}: k = {k}", idx.name());
            }
            println!("wrote {}", dir.display());
        }
        Command::Consensus { reports, out } => {
            let out = out_dir(out, &cfg);
            let dir = commands::consensus(&reports, &out)?;
            println!("wrote {}", dir.display());
        }
        Command::Replicate { data, seed, kmin, kmax, out } => {
            let (dir, sel) = selection(&data, &cfg)?;
            let out = out_dir(out, &cfg);
            let specs: Vec<PipelineSpec> = PipelineName::ALL.iter().map(|&n| cfg.spec_for(n)).collect();
            let opts = commands::ReplicateOptions {
                seed,
                execution: exec,
                k_min: kmin,
                k_max: kmax,
            };
            let summary = commands::replicate(&dir, &sel, &out, &specs, cfg.checksum.clone(), &opts)?;
            print!("{summary}");
        }
        Command::Synth { out, groups, per_group, years, seed, noise } => {
            let (year_min, year_max) = parse_years(&years)?;
            let spec = PlantedSpec {
                groups,
                per_group,
                year_min,
                year_max,
                noise,
                seed,
            };
            commands::synth(&spec, &out)?;
            println!("wrote {} synthetic countries to {}", groups * per_group, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().trim_end());
            ExitCode::from(e.exit_code())
        }
    }
}
