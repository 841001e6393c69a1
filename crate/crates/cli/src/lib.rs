//! Batch front end: `pbft-markov <subcommand> [--config file] [--set k=v]`.
//!
//! Exit codes: 0 on success, 1 for bad input (arguments, config, parameter
//! values, unwritable output), 2 for numerical failures such as an
//! unstable queue or a rate iteration that does not converge. Failures
//! print one line on stderr.

pub mod commands;
pub mod config;
pub mod grid;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
    #[error(transparent)]
    Model(#[from] pbft_markov::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pbft-markov", version, about = "Performance and reliability of PBFT with repairable voting nodes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Flat TOML file with parameters and settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set lambda=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Chain {
    Block,
    Orphan,
    Inherent,
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReliabilityKind {
    Inherent,
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimTarget {
    /// Voting rounds: mean block and orphan times, block probability.
    Round,
    /// Failed-node chain: inherent availability.
    Inherent,
    /// Full round cycle: orphan probability and idle-state occupancy.
    Cycle,
    /// Transaction queue: throughput.
    Queue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    Throughput,
    Availability,
    Reliability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    RateApprox,
}

impl From<MethodArg> for pbft_markov::measures::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => pbft_markov::measures::Method::ExactPh,
            MethodArg::RateApprox => pbft_markov::measures::Method::RateApprox,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean and distribution function of a phase-type time.
    Ph {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "block")]
        chain: Chain,
        /// Include the propagation phase (block and orphan chains).
        #[arg(long)]
        extended: bool,
        /// Time grid; defaults to 200 points up to ten means.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Stationary transaction throughput.
    Throughput {
        #[command(flatten)]
        common: Common,
        /// Defaults to `method` from the config, else exact.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Inherent and operational stationary availability.
    Availability {
        #[command(flatten)]
        common: Common,
    },
    /// Reliability curve and mean time to first failure.
    Reliability {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "inherent")]
        kind: ReliabilityKind,
        #[arg(long)]
        grid: Option<String>,
    },
    /// Stationary law of the full round cycle.
    Stationary {
        #[command(flatten)]
        common: Common,
    },
    /// Gillespie estimates with standard errors.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "round")]
        target: SimTarget,
    },
    /// One row per grid point (in grid order).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long)]
        grid: String,
        /// Optional second parameter; rows cover the product of both grids.
        #[arg(long, requires = "grid2")]
        param2: Option<String>,
        #[arg(long, requires = "param2")]
        grid2: Option<String>,
        #[arg(long, value_enum, default_value = "throughput")]
        measure: Measure,
        /// Defaults to `method` from the config, else rate-approx.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
}

/// Parses `argv` (program name first), runs and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("bad arguments");
            eprintln!("{}", line.trim());
            return 1;
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.split_whitespace().collect::<Vec<_>>().join(" "));
            e.exit_code()
        }
    }
}
