//! Command-line front end for the 1-bit bound and tracking experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 finished but some Monte-Carlo trials were discarded.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod table;

use commands::Report;
use config::{Origin, RunConfig, Setting};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DISCARDED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] onebit_core::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use onebit_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(
                E::InvalidArgument(_)
                | E::UnknownScenario(_)
                | E::Parse { .. }
                | E::Unsupported(_)
                | E::LengthMismatch { .. },
            ) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "onebit", version, about = "Bounds and particle-filter tracking with 1-bit measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fisher information of one block and the 1-bit loss chi.
    Fisher {
        #[command(flatten)]
        common: Common,
        /// Also report the Bayesian information and the loss psi.
        #[arg(long)]
        bayes: bool,
    },
    /// Tracking bounds of both receivers per block.
    Bound {
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo particle-filter RMSE beside the bounds.
    Track {
        #[command(flatten)]
        common: Common,
    },
    /// Loss over a log grid of beta = 1 - alpha.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "BETA")]
        beta_min: Option<String>,
        #[arg(long, value_name = "BETA")]
        beta_max: Option<String>,
        #[arg(long)]
        points: Option<String>,
        /// Emit the block-wise loss rho_k for k = 0..=blocks instead of the
        /// steady state.
        #[arg(long)]
        per_block: bool,
    },
    /// Convergence speed and the additional delay of the 1-bit receiver.
    Transient {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<String>,
    },
}

/// Flags shared by every command. Values stay textual here and are
/// validated together with config file entries.
#[derive(Debug, Args)]
pub struct Common {
    /// Built-in scenario (ranging, uwb, mobile) or a config file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Config file of `key = value` lines; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Worker threads, or `auto`.
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: Option<String>,
    #[arg(long)]
    pub sigma0: Option<String>,
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub particles: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    /// Number of simulated processes.
    #[arg(long)]
    pub trials: Option<String>,
    /// Noise realizations per process.
    #[arg(long)]
    pub realizations: Option<String>,
    /// Delay unit of ranging inputs and outputs: chips, seconds or meters.
    #[arg(long)]
    pub unit: Option<String>,
}

impl Common {
    fn settings(&self) -> Vec<Setting> {
        [
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("snr_db", &self.snr_db),
            ("alpha", &self.alpha),
            ("sigma", &self.sigma),
            ("mu0", &self.mu0),
            ("sigma0", &self.sigma0),
            ("blocks", &self.blocks),
            ("particles", &self.particles),
            ("kappa", &self.kappa),
            ("trials", &self.trials),
            ("realizations", &self.realizations),
            ("unit", &self.unit),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| flag(k, v)))
        .collect()
    }
}

fn flag(key: &str, value: &str) -> Setting {
    Setting {
        key: key.to_string(),
        value: value.to_string(),
        origin: Origin::Flag,
    }
}

fn resolve(common: &Common, extra: &[(&str, &Option<String>)]) -> Result<RunConfig, CliError> {
    let mut flags = common.settings();
    flags.extend(extra.iter().filter_map(|(k, v)| v.as_ref().map(|v| flag(k, v))));
    RunConfig::resolve(common.scenario.as_deref(), common.config.as_deref(), flags)
}

/// Runs a parsed command and returns its report and output destination.
pub fn execute(cli: &Cli) -> Result<(Report, Option<PathBuf>), CliError> {
    let (report, common) = match &cli.command {
        Command::Fisher { common, bayes } => (commands::cmd_fisher(&resolve(common, &[])?, *bayes)?, common),
        Command::Bound { common } => (commands::cmd_bound(&resolve(common, &[])?)?, common),
        Command::Track { common } => (commands::cmd_track(&resolve(common, &[])?)?, common),
        Command::Sweep {
            common,
            beta_min,
            beta_max,
            points,
            per_block,
        } => {
            let cfg = resolve(
                common,
                &[("beta_min", beta_min), ("beta_max", beta_max), ("points", points)],
            )?;
            let report = if *per_block {
                commands::cmd_sweep_blocks(&cfg)?
            } else {
                commands::cmd_sweep(&cfg)?
            };
            (report, common)
        }
        Command::Transient { common, lambda } => {
            (commands::cmd_transient(&resolve(common, &[("lambda", lambda)])?)?, common)
        }
    };
    Ok((report, common.output.clone()))
}

fn write_output(csv: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, csv).map_err(|source| CliError::Output {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(csv.as_bytes())
            .map_err(|source| CliError::Output {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run<I, T>(args: I) -> i32
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
    let outcome = execute(&cli).and_then(|(report, path)| {
        write_output(&report.table.to_csv(), path.as_deref())?;
        Ok(report.discarded)
    });
    match outcome {
        Ok(0) => EXIT_OK,
        Ok(n) => {
            eprintln!("warning: {n} trials discarded after particle-cloud degeneracy");
            EXIT_DISCARDED
        }
        Err(e) => {
            eprintln!("onebit: {e}");
            e.exit_code()
        }
    }
}
