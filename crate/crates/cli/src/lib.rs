//! `thetaprime` command-line driver.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thetaprime_core::{BackendKind, SpatialForm};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
#[cfg(feature = "plots")]
pub mod plots;

use config::{Overrides, RunConfig};
use error::{CliError, Result, EXIT_CONFIG, EXIT_OK};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "THETAPRIME_THREADS";

#[derive(Debug, Parser)]
#[command(name = "thetaprime", version, about = "Phase-field simulation and physics-residual evaluation")]
pub struct Cli {
    /// TOML run configuration; omitted keys take built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Derivative backend.
    #[arg(long, global = true, value_name = "fdm|pseudo|fext", value_parser = parse_backend)]
    pub backend: Option<BackendKind>,

    /// Fourth-order operator in the Cahn-Hilliard equation (`paper` is accepted as an alias of `axis`).
    #[arg(long, global = true, value_name = "axis|biharmonic", value_parser = parse_form)]
    pub spatial_form: Option<SpatialForm>,

    /// Saved frames per run.
    #[arg(long, global = true, value_name = "N")]
    pub frames: Option<usize>,

    /// Initial-condition seed.
    #[arg(long, global = true, value_name = "S")]
    pub seed: Option<u64>,

    /// Initial composition.
    #[arg(long, global = true, value_name = "X")]
    pub c0: Option<f64>,

    /// Write PNG snapshots.
    #[arg(long, global = true)]
    pub plots: bool,

    /// Print console tables as CSV with full-precision numbers.
    #[arg(long, global = true)]
    pub machine: bool,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one (c0, seed) run.
    Simulate,
    /// Simulate every sweep combination into one dataset file.
    Sweep,
    /// Split a dataset into train and test files.
    Split {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "N")]
        n_train: Option<usize>,
        #[arg(long, value_name = "S")]
        selection_seed: Option<u64>,
    },
    /// Per-frame PDE residuals of a dataset.
    Residual {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Only this instance (default: all).
        #[arg(long, value_name = "I")]
        instance: Option<usize>,
    },
    /// Score predictions against ground truth.
    Evaluate {
        /// Dataset file or NPY export directory.
        #[arg(long, value_name = "PATH")]
        pred: PathBuf,
        /// Dataset file or NPY export directory.
        #[arg(long, value_name = "PATH")]
        truth: PathBuf,
    },
    /// Loss table for every derivative backend.
    BackendCompare {
        /// Trajectory source; a manufactured solution when omitted.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Ground truth for the data terms.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        #[arg(long, value_name = "I", default_value_t = 0)]
        instance: usize,
    },
    /// Write a dataset as NPY files plus a JSON manifest.
    Export {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

fn parse_backend(s: &str) -> std::result::Result<BackendKind, String> {
    s.parse().map_err(|e: thetaprime_core::Error| e.to_string())
}

fn parse_form(s: &str) -> std::result::Result<SpatialForm, String> {
    s.parse().map_err(|e: thetaprime_core::Error| e.to_string())
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            backend: self.backend,
            spatial_form: self.spatial_form,
            frames: self.frames,
            seed: self.seed,
            c0: self.c0,
            plots: self.plots,
        }
    }

    /// File config with flags applied, validated.
    pub fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sizes the global rayon pool from the environment, once per process.
fn configure_threads() -> Result<()> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::debug!("thread pool already configured: {e}");
    }
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match configure_threads().and_then(|_| commands::dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let mut shown = e.to_string();
            eprintln!("error: {shown}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let msg = s.to_string();
                if !shown.contains(&msg) {
                    eprintln!("  caused by: {msg}");
                    shown = msg;
                }
                source = s.source();
            }
            e.exit_code()
        }
    }
}
