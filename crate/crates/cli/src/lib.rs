//! Command-line front end for kernel h-depth: curve CSV ingestion, validated
//! run configuration, command dispatch and reproducible JSON/CSV reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;

pub use commands::{dispatch, Outcome};
pub use config::{Cli, Command, CommandKind, RunConfig};
pub use error::{CliError, EXIT_DATA, EXIT_OK, EXIT_REJECT, EXIT_USAGE};

/// Resolves, validates and runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(RunConfig, Outcome), CliError> {
    let config = RunConfig::from_command(&cli.command)?;
    let outcome = dispatch(&config)?;
    Ok((config, outcome))
}
