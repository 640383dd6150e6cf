//! Configuration-driven runs of the platform queue solver: stability
//! reports, analytic solves, parameter sweeps, simulations and sojourn-time
//! distributions, written as CSV.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use platform_qbd::QbdError;

use crate::commands::{CommandOutput, EXIT_CONFIG, EXIT_SOLVER, EXIT_UNSTABLE, EXIT_UNSUPPORTED};
use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unstable instance: {0}")]
    Unstable(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<QbdError> for CliError {
    fn from(e: QbdError) -> Self {
        match e {
            QbdError::InvalidParams(_) | QbdError::Undefined(_) => CliError::Config(e.to_string()),
            QbdError::Unstable { .. } => CliError::Unstable(e.to_string()),
            QbdError::Capacity { .. } => CliError::Unsupported(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Json(_) => EXIT_CONFIG,
            CliError::Unstable(_) => EXIT_UNSTABLE,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Unsupported(_) => EXIT_UNSUPPORTED,
            CliError::Io(_) | CliError::Csv(_) => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "platform-qbd",
    version,
    about = "Matrix-analytic solver for two-sided service platforms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file prefix; overrides the configuration. Without one, CSV goes
    /// to stdout.
    #[arg(long)]
    pub out: Option<String>,
    /// Emit rows for unstable sweep points instead of failing.
    #[arg(long)]
    pub allow_unstable: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Traffic intensity and minimal owner counts.
    Stability(CommonArgs),
    /// Stationary solve of one point.
    Solve(CommonArgs),
    /// One row per point of the configured grid.
    Sweep(CommonArgs),
    /// Simulation estimates next to analytic values.
    Simulate(CommonArgs),
    /// Sojourn-time distribution and means.
    Sojourn(CommonArgs),
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Stability(a)
            | Command::Solve(a)
            | Command::Sweep(a)
            | Command::Simulate(a)
            | Command::Sojourn(a) => a,
        }
    }
}

pub fn execute(command: &Command, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let args = command.args();
    match command {
        Command::Stability(_) => commands::cmd_stability(cfg),
        Command::Solve(_) => commands::cmd_solve(cfg),
        Command::Sweep(_) => commands::cmd_sweep(cfg, args.allow_unstable),
        Command::Simulate(_) => commands::cmd_simulate(cfg),
        Command::Sojourn(_) => commands::cmd_sojourn(cfg),
    }
}

/// Writes `<prefix><suffix>` for every file, or prints the non-detail files
/// to stdout without a prefix.
pub fn emit(output: &CommandOutput, prefix: Option<&str>) -> Result<(), CliError> {
    for note in &output.notes {
        eprintln!("{note}");
    }
    match prefix {
        Some(prefix) => {
            for f in &output.files {
                let path = format!("{prefix}{}", f.suffix);
                if let Some(dir) = Path::new(&path).parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(&path, &f.contents)?;
            }
        }
        None => {
            for f in output.files.iter().filter(|f| !f.detail) {
                print!("{}", f.contents);
            }
        }
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let args = cli.command.args();
    let result = RunConfig::load(&args.config).and_then(|cfg| {
        let out = execute(&cli.command, &cfg)?;
        let prefix = args.out.clone().or_else(|| cfg.outputs.clone());
        emit(&out, prefix.as_deref())?;
        Ok(out.exit_code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
