//! Command-line front end: argument handling, run orchestration and output
//! files for the `hmm-emt` binary.

pub mod args;
pub mod commands;
pub mod output;

use std::process::ExitCode;

pub use args::{Cli, Command, RunConfig, Span};
pub use output::{emit_summary, resolve_selection, write_trajectory_csv, SummaryRow};

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, case or scenario: exit 2.
    Usage(String),
    /// Simulation or file failure: exit 1 for numerical failures, 2 for
    /// input errors.
    Core(hmm_emt::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 1,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hmm_emt::Error> for CliError {
    fn from(e: hmm_emt::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => commands::run(a),
        Command::Compare(a) => commands::compare_cmd(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::ValidateCase(a) => commands::validate_case(a),
    }
}

/// Parses `argv`, runs the command and returns the exit code
/// (0 ok, 1 numerical failure, 2 usage).
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
