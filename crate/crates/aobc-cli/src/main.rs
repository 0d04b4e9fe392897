//! `aobc`: sweep and experiment driver for the expected-age simulator.
//!
//! Subcommands read a flat key-value config (see `config.rs`) and write CSV.
//! Output is byte-identical across reruns and thread counts unless
//! `--timings` is passed, so result files can be diffed directly.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 bad config or input file,
//! 3 finished but some cells were not computable (emitted as NaN).

mod config;
mod selftest;
mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aobc_core::geometry::Realization;
use aobc_core::Error;

use config::{emit_config, parse_config};
use sweep::{run_bounds, run_instance_file, run_sweep, RunReport};

// ============================================================================
// Errors and exit codes
// ============================================================================

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A configuration file was rejected. `line == 0` marks a structural
    /// problem with no single position.
    #[error("{path}: {}{why}", position(*line, *column))]
    Config {
        path: String,
        line: usize,
        column: usize,
        why: String,
    },

    /// An input or output file could not be opened or read.
    #[error("{path}: {why}")]
    File { path: String, why: String },

    #[error(transparent)]
    Core(#[from] Error),
}

fn position(line: usize, column: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("line {line}, column {column}: ")
    }
}

fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Config { .. } | CliError::File { .. } => 2,
        CliError::Core(e) => match e {
            Error::Parse { .. } | Error::InvalidArgument { .. } => 2,
            Error::CapacityExceeded { .. } | Error::DelayTimeout { .. } => 3,
            _ => 1,
        },
    }
}

// ============================================================================
// Command line
// ============================================================================

/// Expected-age simulation and analytics for a slotted random-access
/// network: Monte Carlo sweeps, exact per-realization values, and
/// closed-form bounds, all from one config file.
#[derive(Parser)]
#[command(name = "aobc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one model parameter over a grid; one CSV row per output per
    /// grid point.
    Sweep {
        /// Configuration file (empty file = built-in defaults).
        config: PathBuf,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill the runtime_s column with wall times (breaks byte-level
        /// reproducibility of the output).
        #[arg(long)]
        timings: bool,
    },
    /// Evaluate every requested output on one stored realization.
    Instance {
        /// Realization file as written by the library's text format.
        realization: PathBuf,
        /// Configuration file; its radius is overridden by the file's.
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timings: bool,
    },
    /// Closed-form bounds over the grid; no simulation, runs instantly.
    Bounds {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a configuration with every default filled in. An empty file
    /// yields the full default template.
    Config { config: PathBuf },
    /// Recompute frozen reference values and check determinism.
    Selftest,
}

// ============================================================================
// Plumbing
// ============================================================================

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::File {
        path: path.display().to_string(),
        why: e.to_string(),
    })
}

fn open_out(out: Option<&PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| CliError::File {
                path: path.display().to_string(),
                why: e.to_string(),
            })?;
            Ok(Box::new(io::BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout())),
    }
}

fn dispatch(command: Command) -> Result<RunReport, CliError> {
    match command {
        Command::Sweep {
            config,
            out,
            timings,
        } => {
            let spec = parse_config(&config.display().to_string(), &read_file(&config)?)?;
            let mut writer = open_out(out.as_ref())?;
            run_sweep(&spec, &mut writer, timings)
        }
        Command::Instance {
            realization,
            config,
            out,
            timings,
        } => {
            let spec = parse_config(&config.display().to_string(), &read_file(&config)?)?;
            let realization = Realization::from_text(&read_file(&realization)?)?;
            let mut writer = open_out(out.as_ref())?;
            run_instance_file(&spec, &realization, &mut writer, timings)
        }
        Command::Bounds { config, out } => {
            let spec = parse_config(&config.display().to_string(), &read_file(&config)?)?;
            let mut writer = open_out(out.as_ref())?;
            run_bounds(&spec, &mut writer)
        }
        Command::Config { config } => {
            let spec = parse_config(&config.display().to_string(), &read_file(&config)?)?;
            print!("{}", emit_config(&spec));
            Ok(RunReport {
                rows: 0,
                partial: false,
            })
        }
        Command::Selftest => unreachable!("handled before dispatch"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::Selftest) {
        let mut stdout = io::stdout();
        return match selftest::run(&mut stdout) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    match dispatch(cli.command) {
        Ok(report) if report.partial => {
            eprintln!("note: some cells were not computable and were written as NaN");
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
