//! Command-line front end for dualrec.
//!
//! `dualrec estimate` fits one table, `dualrec simulate` runs a replicated
//! study, `dualrec diagnose` scans burn-in lengths and `dualrec replay`
//! re-runs the command stored in a manifest.

pub mod commands;
pub mod error;
pub mod input;
pub mod output;
pub mod settings;

use std::ffi::OsString;

use clap::Parser;

pub use error::{exit, CliError, Result};

use commands::Command;

#[derive(Parser, Debug)]
#[command(
    name = "dualrec",
    version,
    about = "Population size estimation for dual-record systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Executes a parsed command and returns the text meant for stdout.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Estimate(a) => commands::estimate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Replay(a) => {
            let argv = commands::replay_argv(&a)?;
            let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(CliError::Config(
                    "a manifest cannot replay another replay".into(),
                ));
            }
            execute(cli)
        }
    }
}

/// Parses `args` (program name first) and executes them.
pub fn run<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    execute(cli)
}
