//! Command-line front end for the mapping pipeline.
//!
//! Four subcommands cover the workflow: `convert` turns calibrated radiance
//! into top-of-atmosphere reflectance, `map` runs the full mapping chain on
//! a reflectance cube, `report` correlates the resulting rasters against
//! ground-truth sites, and `synth` generates test scenes with known truth.
//!
//! Exit status: 0 success, 1 usage error, 2 unreadable or malformed input,
//! 3 precondition violated, 4 numerical degeneracy.

mod convert;
mod map;
mod report;
mod synth;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lithomap::config::FlatConfig;
use lithomap::ErrorClass;

#[derive(Parser)]
#[command(
    name = "lithomap",
    version,
    about = "Map a target mineral from hyperspectral imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a calibrated radiance cube to top-of-atmosphere reflectance
    Convert(convert::ConvertArgs),
    /// Run the mapping chain on a reflectance cube
    Map(map::MapArgs),
    /// Correlate mapped rasters against ground-truth sites
    Report(report::ReportArgs),
    /// Generate synthetic scenes with known ground truth
    Synth(synth::SynthArgs),
}

/// Flags every subcommand accepts.
#[derive(Args)]
pub struct Shared {
    /// Flat key = value config file; explicit flags win over its entries
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic stage
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; 0 keeps the library default
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

pub enum CliError {
    Usage(String),
    Core(lithomap::Error),
}

pub type CliResult = Result<(), CliError>;

impl From<lithomap::Error> for CliError {
    fn from(e: lithomap::Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Precondition => 3,
                ErrorClass::Numerical => 4,
            },
        }
    }
}

/// Load the file named by `--config`, if any.
fn load_config(shared: &Shared) -> Result<Option<FlatConfig>, CliError> {
    match &shared.config {
        Some(path) => Ok(Some(FlatConfig::load(path)?)),
        None => Ok(None),
    }
}

/// A missing required input is a usage error when no config file could have
/// supplied it; with a config file in play the gap is the file's fault and
/// classes as bad input.
fn missing(what: &str, flag: &str, key: &str, had_config: bool) -> CliError {
    if had_config {
        CliError::Core(lithomap::Error::InvalidSpec {
            reason: format!("config names no {what}; add `{key} = ...` or pass {flag}"),
        })
    } else {
        CliError::Usage(format!(
            "no {what}: pass {flag} (or `{key}` in a --config file)"
        ))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(lithomap::Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Convert(args) => convert::run(args),
        Command::Map(args) => map::run(args),
        Command::Report(args) => report::run(args),
        Command::Synth(args) => synth::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
