//! `semidi`: certify genuine three-outcome measurements from prepare-and-measure
//! statistics, and regenerate the data behind the figures.
//!
//! Exit codes: 0 certified or success, 1 not certified, 2 inconclusive,
//! 64 bad usage or input, 73 output path not writable.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Figure, SimulateArgs, SweepKind};
use config::{Family, Format, RunConfig};
use error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "semidi", version, about = "Semi-device-independent certification of three-outcome POVMs")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by all subcommands. They override the `--config` file, which
/// overrides built-in defaults.
#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML file with any of the keys below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overlap lower bound between the two preparations.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Behavior JSON `{"p": [[..3],[..3]], "delta": r}`.
    #[arg(long, global = true)]
    behavior: Option<PathBuf>,
    /// Reference behavior: `uniform` or a behavior JSON path.
    #[arg(long, global = true)]
    p0: Option<String>,
    /// Solver tolerance. Defaults to $SEMIDI_TOL, then 1e-9.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sweep grid `start:stop:step`.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Measurement family for randomness curves.
    #[arg(long, global = true, value_enum)]
    family: Option<Family>,
}

impl CommonArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            delta: self.delta,
            behavior: self.behavior.clone(),
            p0: self.p0.clone(),
            tol: self.tol,
            grid: self.grid.clone(),
            out: self.out.clone(),
            format: self.format,
            family: self.family,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute ω* for a behavior and, when certified, a dual witness.
    Certify,
    /// Compute a dual witness, or check one with --check.
    Witness {
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Write the two- and three-outcome slice regions for --delta.
    Boundary,
    /// Unambiguous-discrimination witness for a behavior, or the ideal one at --delta.
    Usd,
    /// Verify the self-test of the ideal USD realization, optionally rotated.
    Selftest {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rotation: f64,
    },
    /// Run a parameter sweep over --grid.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
    },
    /// Min-entropy of a behavior, or noise curves for --delta and --family.
    Randomness,
    /// Simulate the behavior of a measurement on the preparations at --delta.
    Simulate(SimulateArgs),
    /// Regenerate the data behind a figure.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let file = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let settings = config::resolve(cli.common.as_config().or(file))?;
    match &cli.command {
        Command::Certify => commands::certify(&settings),
        Command::Witness { check } => commands::witness(&settings, check.as_deref()),
        Command::Boundary => commands::boundary(&settings),
        Command::Usd => commands::usd(&settings),
        Command::Selftest { rotation } => commands::selftest(&settings, *rotation),
        Command::Sweep { kind } => commands::sweep(&settings, *kind),
        Command::Randomness => commands::randomness(&settings),
        Command::Simulate(args) => commands::simulate(&settings, args),
        Command::Reproduce { figure } => commands::reproduce(&settings, *figure),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("semidi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
