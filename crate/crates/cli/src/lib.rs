//! Command-line front end for the `bns-emm` library.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "BNS_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "bns-emm", version, about = "Equivalent martingale measures for BNS stochastic volatility")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write simulated paths as CSV.
    Simulate(Common),
    /// Tabulate the Esscher parameters over the variance grid.
    Solve(Common),
    /// Evaluate the sufficient existence and martingale conditions.
    Check(Common),
    /// Check E[G_T] = 1 and E[G_T S_T] = S_0 by Monte Carlo.
    Verify(Common),
    /// Price European options under one or more measures.
    Price(Common),
    /// Compare measure parameters over the variance grid.
    Compare(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Dotted override, e.g. `model.rho=-0.5` (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Structure-preserving tilt: `identity`, `esscher_on_z:THETA` or `csv:FILE`.
    #[arg(long)]
    pub tilt: Option<String>,
    /// Worker threads (overrides the config and the environment).
    #[arg(short, long)]
    pub workers: Option<usize>,
    /// Output directory (overrides `output.dir`).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 64,
                _ => 2,
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}
