//! `lagfib`: torus fibrations and minimal tori of toric Kähler models.
//!
//! Exit status: 0 success, 2 configuration error, 3 numerical failure,
//! 4 verification failure.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::commands::Run;
use crate::config::{ConfigError, Overrides, RunConfig};
use crate::output::Output;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] lagfib::Error),
    #[error("{0}")]
    Failed(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Failed(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Output { .. } => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "lagfib", version, about = "H-minimal torus fibrations and minimal tori of toric Kähler models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (defaults to the built-in near-Einstein line model)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Region parameter of Δ_{cτ}
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Spectral truncation N (2N+1 points per axis)
    #[arg(long, global = true, value_name = "N")]
    modes: Option<usize>,
    /// Uniform continuation stages
    #[arg(long, global = true, value_name = "K")]
    stages: Option<usize>,
    /// Base grid: points per axis, or points "x1,x2;y1,y2;..."
    #[arg(long, global = true, value_name = "SPEC")]
    grid: Option<String>,
    #[arg(long, global = true, value_name = "DIR", default_value = "lagfib-out")]
    out: PathBuf,
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Polytope, recentering shift, Ricci sign samples and the log-volume profile
    Describe,
    /// Continuation to s = 1 at the configured fibre
    SolveFiber,
    /// Solves every fibre of the base grid
    Sweep,
    /// Locates the minimal torus as a root of the class map
    FindMinimal,
    /// Runs the oracle suite
    Verify,
    /// Collates earlier outputs in the output directory
    Report,
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    if let Command::Report = cli.command {
        return commands::report(&c.out, c.quiet);
    }
    let ov = Overrides { tau: c.tau, c: c.c, modes: c.modes, stages: c.stages, grid: c.grid.clone(), seed: c.seed };
    let path = c.config.as_ref().map(|p| p.display().to_string());
    let cfg = RunConfig::load(path.as_deref(), &ov)?;
    let model = cfg.build()?;
    let run = Run { cfg, model, out: Output::new(&c.out)?, quiet: c.quiet };
    match cli.command {
        Command::Describe => commands::describe(&run),
        Command::SolveFiber => commands::solve_fiber(&run),
        Command::Sweep => commands::sweep(&run),
        Command::FindMinimal => commands::find_minimal_cmd(&run),
        Command::Verify => verify::verify(&run),
        Command::Report => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lagfib: {e}");
            ExitCode::from(e.code())
        }
    }
}
