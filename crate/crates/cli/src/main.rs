//! `hatsim` command-line front end.
//!
//! Exit status: 0 success, 2 invalid configuration, 3 a timing or invariant
//! violation was detected, 4 I/O failure.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hatsim::report::ReportError;

use config::Flags;

#[derive(Debug, Parser)]
#[command(name = "hatsim", version, about = "Asynchronous AER arbiter and CAM simulator")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Arbiter latency measurements
    Arb {
        #[command(subcommand)]
        command: ArbCommand,
    },
    /// Every architecture at every --n
    Sweep,
    /// Content-addressable memory search
    Cam {
        #[command(subcommand)]
        command: CamCommand,
    },
    /// Arbitrate a workload and route every address through a CAM
    Demo,
    /// Check a recorded trace for timing violations
    Check,
}

#[derive(Debug, Subcommand)]
enum ArbCommand {
    /// Measure one architecture at each --n
    Run,
    /// Sparse latency, burst latency and area tables
    Tables,
}

#[derive(Debug, Subcommand)]
enum CamCommand {
    /// Random-key searches on one array
    Search,
    /// Cycle time and energy for every mechanism combination
    Report,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Csv(e) => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

macro_rules! config_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Config(e.to_string())
            }
        }
    )*};
}

config_error_from!(
    hatsim::arbitration::ArbError,
    hatsim::cam::CamError,
    hatsim::workloads::WorkloadError,
    hatsim::pipeline::PipelineError
);

fn run(cli: Cli) -> Result<commands::Output, CliError> {
    let flags = match &cli.flags.config {
        Some(path) => config::merge(cli.flags.clone(), config::load(path)?),
        None => cli.flags,
    };
    let out = match cli.command {
        Command::Arb { command: ArbCommand::Run } => commands::arb_run(&flags)?,
        Command::Arb { command: ArbCommand::Tables } => commands::arb_tables(&flags)?,
        Command::Sweep => commands::sweep(&flags)?,
        Command::Cam { command: CamCommand::Search } => commands::cam_search(&flags)?,
        Command::Cam { command: CamCommand::Report } => commands::cam_report_cmd(&flags)?,
        Command::Demo => commands::demo(&flags)?,
        Command::Check => commands::check(&flags)?,
    };
    match &flags.out {
        Some(path) => std::fs::write(path, &out.body)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .lock()
            .write_all(out.body.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) if out.violations > 0 => {
            eprintln!("{} violation(s) detected", out.violations);
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
