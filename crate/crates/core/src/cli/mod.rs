//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 selfcheck failure, 2 configuration error, 3 I/O
//! error, 4 solver non-convergence under `--strict`.

pub mod config;
pub mod io;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bias_correction::{ObservedData, ScenarioTag};
use crate::pipeline::estimate_from_covariance;
use crate::simulation::{generate, run_sweep, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("{0} selfcheck oracle(s) failed")]
    Selfcheck(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Selfcheck(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "fantope-pca", version, about = "Sparse PCA with missing or corrupted data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (matrix CSV plus a `.meta.json` sidecar).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the estimation pipeline on a matrix CSV.
    Estimate {
        /// Matrix CSV; a `<stem>.meta.json` sidecar next to it supplies the
        /// ground truth and, without `--config`, the correction.
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        skip_refine: bool,
        /// Report format; `csv` writes the estimated vectors only.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run a replication sweep over an (ω, δ) grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the oracle checks and report pass/fail per oracle.
    Selfcheck,
}

/// Sidecar metadata written by `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub observed_fraction: f64,
    pub ground_truth: Vec<f64>,
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("meta.json")
}

pub fn cmd_simulate(config: &Path, out: &Path, seed: u64) -> Result<(), CliError> {
    let file: config::SimulateFile = config::load(config)?;
    let scenario = file.scenario_config()?;
    let (data, truth) = generate(&scenario, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let meta = SimulationMeta {
        n: data.n_rows(),
        p: data.n_cols(),
        observed_fraction: data.observed_fraction(),
        ground_truth: truth.iter().copied().collect(),
        config: scenario,
        seed,
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    io::write_file(out, &io::matrix_csv(data.values()))?;
    io::write_file(&sidecar_path(out), &meta_json)
}

fn read_sidecar(data: &Path) -> Result<Option<SimulationMeta>, CliError> {
    let path = sidecar_path(data);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_estimate(
    data_path: &Path,
    config_path: Option<&Path>,
    out: &Path,
    strict: bool,
    skip_refine: bool,
    format: Format,
) -> Result<(), CliError> {
    let file: config::EstimateFile = match config_path {
        Some(p) => config::load(p)?,
        None => config::EstimateFile::default(),
    };
    let matrix = io::read_matrix_csv(data_path)?;
    let meta = read_sidecar(data_path)?;
    log::info!(
        "{}: {}x{} matrix, observed density {:.4}",
        data_path.display(),
        matrix.values.nrows(),
        matrix.values.ncols(),
        matrix.mask_density()
    );
    let n = matrix.values.nrows();
    let p = matrix.values.ncols();
    let spec = match (&file.correction, &meta) {
        (Some(section), _) => section.to_spec(p, n)?,
        (None, Some(meta)) => {
            let spec = meta.config.correction();
            spec.validate(Some(p)).map_err(|e| CliError::Config(e.to_string()))?;
            spec
        }
        (None, None) => {
            return Err(CliError::Config(
                "no [correction] section and no simulation sidecar next to the data".into(),
            ))
        }
    };
    let settings = config::settings_from(&file.fantope, &file.refine, skip_refine)?;
    let tag = meta.as_ref().map(|m| m.config.tag()).unwrap_or(ScenarioTag::Full);
    let data = ObservedData::new(matrix.values, tag).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(meta) = &meta {
        if meta.ground_truth.len() != p {
            return Err(CliError::Io(format!(
                "sidecar ground truth has {} entries, data has {p} columns",
                meta.ground_truth.len()
            )));
        }
    }

    let sigma = crate::bias_correction::correct(&data, &spec)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let bundle = estimate_from_covariance(sigma, n, &settings).map_err(|e| match e {
        crate::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
        _ => CliError::NotConverged(e.to_string()),
    })?;
    let truth = meta.map(|m| DVector::from_vec(m.ground_truth));
    let report = report::EstimateReport::new(&bundle, &data, truth.as_ref());
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes"),
        Format::Csv => report::vectors_csv(&bundle),
    };
    io::write_file(out, &body)?;
    if strict && !bundle.fantope.converged {
        return Err(CliError::NotConverged(format!(
            "ADMM stopped after {} iterations (primal residual {:.3e})",
            bundle.fantope.iterations, bundle.fantope.primal_residual
        )));
    }
    Ok(())
}

pub fn cmd_sweep(
    config_path: &Path,
    out: &Path,
    threads: Option<usize>,
    format: Format,
) -> Result<(), CliError> {
    let file: config::SweepFile = config::load(config_path)?;
    let sweep = file.sweep_config()?;
    let rows = match threads {
        Some(t) => {
            if t == 0 {
                return Err(CliError::Config("`--threads` must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(|| run_sweep(&sweep))
        }
        None => run_sweep(&sweep),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let body = match format {
        Format::Csv => io::rows_csv(&rows),
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize"),
    };
    io::write_file(out, &body)
}

pub fn cmd_selfcheck() -> Result<(), CliError> {
    let results = crate::selfcheck::run_all();
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Selfcheck(failed))
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
        Command::Estimate {
            data,
            config,
            out,
            strict,
            skip_refine,
            format,
        } => cmd_estimate(
            &data,
            config.as_deref(),
            &out,
            strict,
            skip_refine,
            format.unwrap_or(Format::Json),
        ),
        Command::Sweep {
            config,
            out,
            threads,
            format,
        } => cmd_sweep(&config, &out, threads, format),
        Command::Selfcheck => cmd_selfcheck(),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
