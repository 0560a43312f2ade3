//! `virus-damage`: generate networks, simulate virus spreading, sweep damage
//! curves, locate the optimal antivirus delay and cross-check the model
//! against its stochastic ground truth.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use virus_damage::dynamics::DynamicsError;
use virus_damage::experiments::ExperimentError;

use crate::config::Fixture;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad configuration or refused request (exit 2).
    #[error("{0}")]
    Config(String),
    /// A numerical invariant failed (exit 3).
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvariantBreach { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Dynamics(d) => d.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "virus-damage", version, about = "Delayed SIR virus spreading and damage on networks")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "VIRUS_DAMAGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a network and write it as an edge list.
    GenNet(GenNetArgs),
    /// Integrate one parameter point and report its damage.
    Simulate(RunArgs),
    /// Mean damage along one parameter or network-family grid.
    Curve(CurveArgs),
    /// All six parameter curves plus both network-family curves.
    Sweep(RunArgs),
    /// Delay minimizing the overall damage.
    OptimalDelay(RunArgs),
    /// Compare Gillespie sampling, the master equation and the mean-field model.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
struct GenNetArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite an existing output file.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// Power-law degree sequence wired into a simple connected graph.
    ScaleFree {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        edges: usize,
        #[arg(long)]
        exponent: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ring lattice with random rewiring.
    SmallWorld {
        #[arg(long)]
        n: usize,
        /// Lattice degree (even).
        #[arg(long)]
        k: usize,
        /// Rewiring probability.
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Overrides shared by every config-driven command; flags win over the file.
#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Integrator step.
    #[arg(long)]
    step: Option<f64>,
    /// Samples per grid point.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Parameter to sweep (beta, gamma, theta, A, alpha, tau).
    #[arg(long)]
    param: Option<String>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Built-in fixture.
    #[arg(long, value_enum, conflicts_with = "config")]
    fixture: Option<Fixture>,
    /// JSON run configuration with an `oracle` section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gillespie runs.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    step: Option<f64>,
    /// Directory for the report and marginal CSVs; the table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::GenNet(args) => commands::gen_net(args),
        Command::Simulate(args) => commands::simulate(&args.load()?),
        Command::Curve(args) => commands::curve(&args.run.load()?, args.param.as_deref()),
        Command::Sweep(args) => commands::sweep(&args.load()?),
        Command::OptimalDelay(args) => commands::optimal_delay(&args.load()?),
        Command::OracleCheck(args) => commands::oracle_check(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
