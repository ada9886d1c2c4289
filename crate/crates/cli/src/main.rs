//! techspace: knowledge-proximity analysis over patent classification
//! networks.
//!
//! Pipeline subcommands over one shared configuration:
//! `ingest` → `proximity` → `evaluate` / `map`, plus `report` to
//! consolidate a finished run. Exit codes: 0 success, 2 input or
//! configuration error, 3 computation error.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommonArgs, RunConfig};

#[derive(Debug)]
pub enum ErrorKind {
    /// Unreadable or inconsistent inputs, bad configuration values.
    Input,
    /// The computation itself cannot proceed (e.g. no qualifying agents).
    Compute,
}

#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    source: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ErrorKind, source: anyhow::Error) -> Self {
        CliError { kind, source }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Compute => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

#[derive(Parser)]
#[command(
    name = "techspace",
    version,
    about = "Knowledge-proximity networks between patent classes: ingest patent data, \
             compute proximity matrices, evaluate measures against historical \
             diversification, and export technology-space backbones."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the four TSV inputs into a validated, cached corpus.
    Ingest(CommonArgs),
    /// Compute the requested proximity matrices from the cached corpus.
    Proximity(ProximityArgs),
    /// Score every requested matrix against historical diversification.
    Evaluate(CommonArgs),
    /// Extract and export the technology-space backbone of one matrix.
    Map(CommonArgs),
    /// Consolidate and cross-check the outputs of a finished run.
    Report(CommonArgs),
}

#[derive(Args)]
struct ProximityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Recompute matrices even when up-to-date outputs exist.
    #[arg(long)]
    force: bool,
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let resolve = |common: &CommonArgs| -> Result<RunConfig, CliError> {
        RunConfig::resolve(common).map_err(|e| CliError::new(ErrorKind::Input, e))
    };
    match &cli.command {
        Command::Ingest(common) => commands::cmd_ingest(&resolve(common)?),
        Command::Proximity(args) => commands::cmd_proximity(&resolve(&args.common)?, args.force),
        Command::Evaluate(common) => commands::cmd_evaluate(&resolve(common)?),
        Command::Map(common) => commands::cmd_map(&resolve(common)?),
        Command::Report(common) => commands::cmd_report(&resolve(common)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
