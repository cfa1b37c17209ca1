//! `phasecov`: evolve phase-covariant qubit dynamics, check complete
//! positivity, dump rates and sweep model parameters.
//!
//! Exit codes: 0 success (and CP everywhere for `cp-check`), 1 usage or
//! invalid parameters, 2 I/O failure, 3 CP violation found by `cp-check`.

mod commands;
mod config;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{CpMethod, ScanParam};
use config::{ModelArgs, RunConfig};

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl From<phasecov::Error> for Failure {
    fn from(e: phasecov::Error) -> Self {
        Failure::Usage(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "phasecov",
    version,
    about = "Phase-covariant qubit dynamics with time-dependent rates"
)]
struct Cli {
    /// TOML file of `flag-name = value` pairs; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial state and write t,P1,Re_alpha,Im_alpha,Gamma,GammaTilde,Omega,g as CSV.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        /// Output CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check positivity and complete positivity on the grid; JSON report, exit 3 on violation.
    CpCheck {
        #[command(flatten)]
        model: ModelArgs,
        /// Which criterion decides the exit code.
        #[arg(long, value_enum, default_value = "both")]
        method: CpMethod,
        /// Output JSON path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the rates on the grid as CSV; singular values are left empty.
    Rates {
        #[command(flatten)]
        model: ModelArgs,
        /// Output CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON listing singular points and empty fields (default: <out>.singular.json).
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Sweep one model parameter and summarise each run as a CSV row.
    Scan {
        #[command(flatten)]
        model: ModelArgs,
        /// Parameter to sweep.
        #[arg(long, value_enum)]
        param: ScanParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        /// Output CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(model: ModelArgs, config: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    let file = config.map(|p| config::read_config_file(p)).transpose()?;
    RunConfig::resolve(model, file).map_err(Failure::Usage)
}

/// Run the command; `Ok(false)` means a CP violation was found.
fn run(cli: Cli) -> Result<bool, Failure> {
    let config = cli.config.as_ref();
    match cli.command {
        Command::Evolve { model, out } => {
            commands::evolve(&resolve(model, config)?, out.as_deref())?;
            Ok(true)
        }
        Command::CpCheck { model, method, out } => {
            commands::cp_check(&resolve(model, config)?, method, out.as_deref())
        }
        Command::Rates {
            model,
            out,
            sidecar,
        } => {
            commands::rates(&resolve(model, config)?, out.as_deref(), sidecar.as_deref())?;
            Ok(true)
        }
        Command::Scan {
            model,
            param,
            values,
            out,
        } => {
            commands::scan(&resolve(model, config)?, param, &values, out.as_deref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(f) => {
            let (Failure::Usage(e) | Failure::Io(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.exit_code())
        }
    }
}
