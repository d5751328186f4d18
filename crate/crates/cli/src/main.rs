//! `cutoff`: parameters, distances, cutoff scans, oracle checks, PDE runs
//! and sampling for the Barenblatt flow, written as CSV or JSON.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cutoff_core::Error;
use serde::{Deserialize, Serialize};

/// Exit status 1 is a failed check or computation, 2 a usage or
/// validation error.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::Constraint(_)
            | Error::Precondition(_)
            | Error::Unsupported(_)
            | Error::Resolution(_)
            | Error::InfiniteMoment { .. } => CliError::Usage(e.to_string()),
            Error::Convergence { .. }
            | Error::Overflow { .. }
            | Error::Stability(_)
            | Error::InsufficientData(_) => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "cutoff", version, about = "Closed-form distances, cutoff scans and oracles for the Barenblatt flow")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores. Falls back to CUTOFF_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file of option values; flags win on conflict.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derived constants of one (d, m) pair.
    Params(commands::ParamsArgs),
    /// W2², relative entropy and Fisher information at one time.
    Distance(commands::DistanceArgs),
    /// Sup distances along a cutoff schedule over a range of dimensions.
    Scan(commands::ScanArgs),
    /// Run oracle suites and report pass/fail.
    Verify(commands::VerifyArgs),
    /// Finite-volume run against the closed-form solution.
    Pde(commands::PdeArgs),
    /// Draws from a Barenblatt profile.
    Sample(commands::SampleArgs),
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("CUTOFF_THREADS") {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("CUTOFF_THREADS must be a non-negative integer, got '{s}'"))),
        _ => Ok(0),
    }
}

fn run(cli: Cli) -> Result<commands::Output, CliError> {
    let cfg = match &cli.global.config {
        Some(path) => config::load(path)?,
        None => Default::default(),
    };
    let global = config::merge(cli.global.clone(), &cfg)?;
    let threads = thread_count(global.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))?;
    let out = match cli.command {
        Command::Params(a) => commands::params(config::merge(a, &cfg)?, &global),
        Command::Distance(a) => commands::distance(config::merge(a, &cfg)?, &global),
        Command::Scan(a) => commands::scan(config::merge(a, &cfg)?, &global),
        Command::Verify(a) => commands::verify(config::merge(a, &cfg)?, &global),
        Command::Pde(a) => commands::pde(config::merge(a, &cfg)?, &global),
        Command::Sample(a) => commands::sample(config::merge(a, &cfg)?, &global),
    }?;
    match &global.out {
        Some(path) => std::fs::write(path, &out.text)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Failure(format!("stdout: {e}")))?;
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = run(cli);
    if let Err(CliError::Usage(msg) | CliError::Failure(msg)) = &result {
        eprintln!("error: {msg}");
    }
    ExitCode::from(exit_status(&result))
}

fn exit_status(result: &Result<commands::Output, CliError>) -> u8 {
    match result {
        Ok(out) if out.passed => 0,
        Ok(_) | Err(CliError::Failure(_)) => 1,
        Err(CliError::Usage(_)) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_statuses() {
        let out = |passed| commands::Output { text: String::new(), passed };
        assert_eq!(exit_status(&Ok(out(true))), 0);
        assert_eq!(exit_status(&Ok(out(false))), 1);
        assert_eq!(exit_status(&Err(CliError::Failure("x".into()))), 1);
        assert_eq!(exit_status(&Err(CliError::Usage("x".into()))), 2);
    }

    #[test]
    fn library_errors_map_to_statuses() {
        assert!(matches!(CliError::from(Error::Constraint("m".into())), CliError::Usage(_)));
        assert!(matches!(CliError::from(Error::Stability("dt".into())), CliError::Failure(_)));
    }
}
