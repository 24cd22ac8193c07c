//! `bellkit` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid input or data,
//! 4 I/O failure, 5 failed reproduction checks.

mod args;
mod commands;
mod config;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::ConfigFile;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_CHECKS_FAILED: u8 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<bellkit::Error> for CliError {
    fn from(e: bellkit::Error) -> Self {
        match e {
            bellkit::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let out = match cli.command {
        Command::Bounds(a) => commands::bounds(a, &cfg)?,
        Command::Quantum(a) => commands::quantum(a, &cfg)?,
        Command::Simulate(a) => commands::simulate(a, &cfg)?,
        Command::Compare(a) => commands::compare(a, &cfg)?,
        Command::Reproduce(a) => commands::reproduce(a, &cfg)?,
    };
    let to_stdout = cli.json.as_deref() == Some(Path::new("-"));
    if !to_stdout {
        print!("{}", out.text);
    }
    if let Some(path) = cli.json.as_deref() {
        output::emit_json(path, &out.json)?;
    }
    if out.failures.is_empty() {
        Ok(0)
    } else {
        for f in &out.failures {
            eprintln!("check failed: {f}");
        }
        Ok(EXIT_CHECKS_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("bellkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
