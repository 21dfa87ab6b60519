//! Command-line front end for the vibrational ladder climbing lab.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<vlc_core::Error> for CliError {
    fn from(e: vlc_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "vlc", version, about = "Vibrational ladder climbing with chirped and double-stepping pulses")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML with unit-tagged quantities).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config (default ./vlc-out).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for scans and sweeps.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Continue from checkpoints left in the output directory.
    #[arg(long, global = true)]
    pub resume: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Bound spectrum, transition dipoles and the missing-rung report.
    Eigen,
    /// Propagate under the configured pulse (and DSP, if given).
    Propagate,
    /// Bayesian optimization of the main-pulse chirp.
    OptimizeSingle,
    /// CMA-ES optimization of main pulse plus double-stepping pulse.
    OptimizeDsp,
    /// Optimize and propagate over an (E0, alpha) grid.
    Scan,
    /// Quantum/classical regime parameters over an (E0, alpha) grid.
    RegimeMap,
    /// Dissociation versus relative DSP phase.
    PhaseSweep,
    /// Energy efficiency of the configured pulses.
    Efficiency {
        /// Dissociation probability; overrides [efficiency] dissociation.
        #[arg(long)]
        dissociation: Option<f64>,
    },
    /// Per-source contributions to |c_j| for one level.
    Contributions {
        #[arg(short = 'j', long)]
        level: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Propagate => "propagate",
            Command::OptimizeSingle => "optimize-single",
            Command::OptimizeDsp => "optimize-dsp",
            Command::Scan => "scan",
            Command::RegimeMap => "regime-map",
            Command::PhaseSweep => "phase-sweep",
            Command::Efficiency { .. } => "efficiency",
            Command::Contributions { .. } => "contributions",
        }
    }
}

/// What a subcommand produced, for the manifest and the terminal.
#[derive(Debug, Default)]
pub struct Report {
    pub outputs: Vec<String>,
    pub summary: Vec<String>,
}

impl Report {
    pub fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_path: Option<String>,
    config_sha256: String,
    seed: u64,
    version: &'a str,
    core_version: &'a str,
    parallelism: Option<usize>,
    resume: bool,
    wall_time_s: f64,
    outputs: &'a [String],
}

pub struct Context {
    pub config: config::NormalizedConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub parallelism: Option<usize>,
    pub resume: bool,
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let start = Instant::now();
    let path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let raw = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(raw.clone())
        .map_err(|_| CliError::Config(format!("{}: not valid UTF-8", path.display())))?;
    let parsed = config::RunConfig::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let normalized = parsed.normalize(base)?;
    let seed = cli.common.seed.or(normalized.seed).unwrap_or(0);
    let out_dir = cli
        .common
        .out_dir
        .clone()
        .or_else(|| normalized.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("vlc-out"));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let ctx = Context {
        config: normalized,
        seed,
        out_dir,
        parallelism: cli.common.parallelism,
        resume: cli.common.resume,
    };
    let mut report = commands::dispatch(&cli.command, &ctx)?;

    let manifest = Manifest {
        command: cli.command.name(),
        config_path: Some(path.display().to_string()),
        config_sha256: format!("{:x}", Sha256::digest(&raw)),
        seed,
        version: env!("CARGO_PKG_VERSION"),
        core_version: vlc_core::VERSION,
        parallelism: ctx.parallelism,
        resume: ctx.resume,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: &report.outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    report.write(&ctx.out_dir, "manifest.json", &json)?;
    Ok(report)
}
