//! `raildelay`: batch entry point for simulation, dataset derivation, model
//! fitting and walk-forward validation.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage, 3 parse,
//! 4 data validation, 5 optimizer convergence, 6 identifiability.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use raildelay::ctmc::{OriginConvention, SegmentScheme};
use raildelay::{CovariateSpec, ErrorKind};

use crate::manifest::{Run, RunStatus};

#[derive(Debug, Parser)]
#[command(name = "raildelay", version, about = "Train delay models along a single line")]
struct Cli {
    /// Output directory. Falls back to $RAILDELAY_OUT, then the current directory.
    #[arg(long, global = true, env = "RAILDELAY_OUT", default_value = ".")]
    out: PathBuf,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a line, its weather and train runs with planted parameters.
    Simulate(SimulateArgs),
    /// Derive the per-section analysis dataset from runs and weather.
    Derive(DeriveArgs),
    /// Fit the stratified Cox model for recurrent primary delays.
    FitCox(FitCoxArgs),
    /// Fit the two-state Markov chain for arrival delays.
    FitMarkov(FitMarkovArgs),
    /// Score the Markov chain with walk-forward folds.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation config (key = value lines). Without it the two-winter preset is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config train count.
    #[arg(long)]
    train_count: Option<usize>,
}

#[derive(Debug, Args)]
struct DeriveArgs {
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    weather: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Derived dataset (dataset.csv).
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated covariates, or "none".
    #[arg(long, default_value = "direction,temperature,humidity,snow_depth,precip_flag")]
    covariates: CovariateSpec,
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    /// Segment boundaries in km, e.g. 200,500. Omit for a homogeneous chain.
    #[arg(long, conflicts_with = "boundaries_file")]
    boundaries: Option<SegmentScheme>,
    /// File with boundaries, such as the suggestion written by fit-cox.
    #[arg(long)]
    boundaries_file: Option<PathBuf>,
    /// State assumed at the initial station.
    #[arg(long, value_enum, default_value_t = Origin::Punctual)]
    origin: Origin,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Origin {
    /// Every train starts punctual at the initial station.
    Punctual,
    /// Start at the first measuring spot in its observed state.
    FirstSpot,
}

impl From<Origin> for OriginConvention {
    fn from(o: Origin) -> Self {
        match o {
            Origin::Punctual => OriginConvention::Punctual,
            Origin::FirstSpot => OriginConvention::FirstSpot,
        }
    }
}

#[derive(Debug, Args)]
struct FitCoxArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Highest event rank kept as its own stratum.
    #[arg(long, default_value_t = 2)]
    max_rank: usize,
    /// Covariate values for the survival curves, key=value pairs.
    #[arg(
        long,
        default_value = "direction=1,temperature=-1.2,humidity=85,snow_depth=3,precip_flag=1"
    )]
    scenario: String,
    /// Number of suggested segment boundaries.
    #[arg(long, default_value_t = 2)]
    drop_points: usize,
    /// Minimum distance (km) between suggested boundaries.
    #[arg(long, default_value_t = 50.0)]
    min_separation: f64,
}

#[derive(Debug, Args)]
struct FitMarkovArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    segments: BoundaryArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    segments: BoundaryArgs,
    #[arg(long, default_value_t = 4)]
    folds: usize,
    #[arg(long, default_value_t = 7)]
    window_days: u32,
    /// Last training day of the first fold (default: data end minus folds × window).
    #[arg(long)]
    first_training_end: Option<NaiveDate>,
    /// Comma-separated distances in km (default: 50, 100, ..., 700).
    #[arg(long)]
    eval_points: Option<String>,
    /// Use the planted parameters from a simulation's truth.json instead of fitting.
    #[arg(long, conflicts_with_all = ["boundaries", "boundaries_file"])]
    truth: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: cannot start {threads} worker threads: {e}");
        return ExitCode::from(1);
    }

    let name = match &cli.command {
        Command::Simulate(_) => "simulate",
        Command::Derive(_) => "derive",
        Command::FitCox(_) => "fit-cox",
        Command::FitMarkov(_) => "fit-markov",
        Command::Validate(_) => "validate",
    };
    let mut run = Run::new(name, cli.out.clone(), threads);
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(&mut run, a),
        Command::Derive(a) => commands::derive(&mut run, a),
        Command::FitCox(a) => commands::fit_cox(&mut run, a),
        Command::FitMarkov(a) => commands::fit_markov(&mut run, a),
        Command::Validate(a) => commands::validate(&mut run, a),
    };
    let (status, code) = match &result {
        Ok(()) => (RunStatus::Succeeded, 0),
        Err(e) => {
            let code = exit_code(e);
            (
                RunStatus::Failed {
                    exit_code: code,
                    error: format!("{e:#}"),
                },
                code,
            )
        }
    };
    if let Err(e) = run.finish(status) {
        eprintln!("error: cannot write manifest: {e:#}");
    }
    if let Err(e) = result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(code)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<commands::UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<raildelay::Error>() {
            return match e.kind() {
                ErrorKind::Io => 1,
                ErrorKind::Parse => 3,
                ErrorKind::Validation => 4,
                ErrorKind::Convergence => 5,
                ErrorKind::Identifiability => 6,
            };
        }
    }
    1
}
