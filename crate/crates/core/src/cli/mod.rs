//! Command-line front end: scenario files in, CSV/JSON/SVG out.
//!
//! Exit codes: 0 success, 1 I/O or self-test failure, 2 config schema
//! error, 3 physics error raised by the library.

pub mod config;
pub mod output;
mod selftest;
mod tasks;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{ScenarioConfig, SchemaError, Task};
pub use selftest::{selftest, SelftestReport};
pub use tasks::{run_file, run_scenario, RunOptions, RunOutcome};

use crate::error::Error;

#[derive(Debug)]
pub enum CliError {
    Schema(SchemaError),
    Physics(Error),
    Io { path: String, message: String },
    Selftest(String),
}

impl CliError {
    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Selftest(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Physics(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(e) => write!(f, "config error: {e}"),
            CliError::Physics(e) => write!(f, "error: {e}"),
            CliError::Io { path, message } => write!(f, "I/O error on {path}: {message}"),
            CliError::Selftest(m) => write!(f, "selftest failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Physics(e)
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::Schema(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spinnet",
    version,
    about = "Transfer, routing and entanglement in XX spin networks"
)]
pub struct Cli {
    /// Output directory; overrides `output.path` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Suppress the summary on standard output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Scenario file (TOML).
    #[arg(long, short, value_name = "PATH")]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the task named in the config.
    Run(ConfigArg),
    /// Network eigenvalues, degeneracy classes and terminal overlaps.
    Spectrum(ConfigArg),
    /// Exact dynamics from the source terminal.
    Simulate(ConfigArg),
    /// Calibrate a terminal pair for full transfer.
    Calibrate(ConfigArg),
    /// Retune the source to one user and measure crosstalk.
    Route(ConfigArg),
    /// Assign user frequencies under separation constraints.
    Plan(ConfigArg),
    /// Bell or W state preparation.
    Entangle(ConfigArg),
    /// Built-in numerical consistency checks.
    Selftest,
}

fn execute(cli: &Cli) -> Result<RunOutcome, CliError> {
    let (arg, task) = match &cli.command {
        Command::Selftest => {
            let report = selftest(cli.seed.unwrap_or(0));
            let outcome = RunOutcome {
                summary: report.lines.clone(),
                ..RunOutcome::default()
            };
            if !report.passed() {
                if !cli.quiet {
                    for l in &outcome.summary {
                        println!("{l}");
                    }
                }
                return Err(CliError::Selftest(format!("{} check(s) failed", report.failures())));
            }
            return Ok(outcome);
        }
        Command::Run(a) => (a, None),
        Command::Spectrum(a) => (a, Some(Task::Spectrum)),
        Command::Simulate(a) => (a, Some(Task::Simulate)),
        Command::Calibrate(a) => (a, Some(Task::Calibrate)),
        Command::Route(a) => (a, Some(Task::Route)),
        Command::Plan(a) => (a, Some(Task::Plan)),
        Command::Entangle(a) => (a, Some(Task::Entangle)),
    };
    tasks::run_file(&arg.config, task, cli.output.clone())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if !cli.quiet {
                for l in &outcome.summary {
                    println!("{l}");
                }
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
