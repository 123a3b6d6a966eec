//! `strainshape`: simulate, estimate, calibrate and compare from the command
//! line.
//!
//! Exit codes: 0 success, 1 I/O error, 2 invalid input or schema error,
//! 3 more than half of the configurations failed to converge, 4 rank-deficient
//! calibration.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "strainshape",
    version,
    about = "Shape sensing of soft continuum arms from wide-angle camera silhouettes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON file with defaults for any flag (keys are flag names); flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads for per-configuration work (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic dataset from a scenario.
    Simulate {
        /// Scenario JSON; omitted fields take their defaults.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pixel noise standard deviation, overriding the scenario.
        #[arg(long)]
        noise_px: Option<f64>,
    },
    /// Fit strain coefficients to every configuration of a dataset.
    Estimate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        basis: BasisArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
        /// Directory receiving one shape CSV per configuration.
        #[arg(long)]
        shapes_dir: Option<PathBuf>,
    },
    /// Estimate the base pose or the magnetic-sensor chain.
    Calibrate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<CalibMode>,
        /// Initial base pose (base mode) as pose JSON.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Random restarts for the consistency check (sensor mode).
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Fit a dataset with several bases and tabulate tip errors.
    Compare {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// CSV report path; the JSON report and per-configuration errors are
        /// written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated bases, e.g. `constant,piecewise-2,poly-3`.
        #[arg(long)]
        bases: Option<String>,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
}

#[derive(Args, Debug, Default)]
pub struct BasisArgs {
    #[arg(long, value_enum)]
    pub basis: Option<BasisKind>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct IntegratorArgs {
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorKind>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Constant,
    Piecewise,
    Poly,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegratorKind {
    Exp1,
    Cg3,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibMode {
    Base,
    Sensor,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("strainshape: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Schema(e.to_string())
    }
}
