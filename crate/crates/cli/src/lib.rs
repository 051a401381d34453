//! Command-line front end for `lamqsd`.
//!
//! Every command is a pure function of its flags and seed. Worker count only
//! changes speed, and timings go to stderr, so stdout and every written file
//! are byte-identical across reruns.

pub mod commands;
pub mod output;
pub mod svg;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lamqsd::spectral::SpectralError;

#[derive(Debug, Parser)]
#[command(
    name = "lamqsd",
    version,
    about = "Random recursive laminations and their label branching processes"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo work (results do not depend on it).
    #[arg(long, global = true, env = "LAMQSD_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the polygon-throwing construction; write an SVG and the genealogy.
    Lam(LamArgs),
    /// Monte Carlo estimates of the good-path count and its non-emptiness.
    Labels(LabelsArgs),
    /// Classify the killed label chain as sub-, super- or critical.
    Classify(ClassifyArgs),
    /// Run invariant and reproduction checks; nonzero exit on any failure.
    Verify(VerifyArgs),
    /// Dump eigenvalues, eigenvectors and conditioned laws as CSV.
    Spectral(SpectralArgs),
}

#[derive(Debug, Args)]
pub struct LamArgs {
    /// Polygon arity (2 for chords).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..))]
    pub k: u8,
    /// Number of polygons thrown (accepted or not).
    #[arg(long, default_value_t = 1000)]
    pub throws: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "lamination.svg")]
    pub svg: PathBuf,
    /// Genealogy file: `address<TAB>label<TAB>throwIndex` per fragment.
    #[arg(long, default_value = "genealogy.tsv")]
    pub tree: PathBuf,
    /// Draw chords as hyperbolic geodesics instead of straight segments.
    #[arg(long)]
    pub hyperbolic: bool,
    /// Image width and height in pixels.
    #[arg(long, default_value_t = 800, value_parser = clap::value_parser!(u32).range(64..=20000))]
    pub size: u32,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..=64))]
    pub k: u32,
    /// Killing threshold: labels below `a` are dead.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub a: u32,
    /// Root label (defaults to `a`).
    #[arg(long)]
    pub x0: Option<u32>,
    /// Depth.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = lamqsd::estimators::DEFAULT_BATCHES)]
    pub batches: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Node cap per sampled tree.
    #[arg(long, default_value_t = lamqsd::branching::DEFAULT_NODE_BUDGET)]
    pub budget: u64,
    /// CSV output, one row per estimator.
    #[arg(long, default_value = "labels.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Fill the `wallTime` column (makes the output run-dependent).
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=64))]
    pub k: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=200))]
    pub a: u32,
    /// Initial truncation; doubled until the eigenvalue settles.
    #[arg(long = "N", alias = "n-max", default_value_t = 30)]
    pub n_max: u32,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Eigen,
    Qsd,
    Martingale,
    Certificate,
    Geometry,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Harvested splits per (k, parent label) cell in the geometry suite.
    #[arg(long, default_value_t = 100_000)]
    pub splits: u64,
    /// Random configurations for the disjointness cross-check.
    #[arg(long, default_value_t = 10_000)]
    pub cases: usize,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..=64))]
    pub k: u32,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=200))]
    pub a: u32,
    /// Largest truncation in the eigenvalue table.
    #[arg(long = "N", alias = "n-max", default_value_t = 300)]
    pub n_max: u32,
    /// Conditioned laws are dumped for `n = 0..=steps`.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Start label of the conditioned chain (defaults to `a`).
    #[arg(long)]
    pub x0: Option<u32>,
    #[arg(long, default_value = "spectral-out")]
    pub out_dir: PathBuf,
}

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    CheckFailed(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::CheckFailed(_) | CliError::Other(_) => 1,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NonConvergence { .. } | SpectralError::TruncationSensitive { .. } => {
                CliError::NonConvergence(e.to_string())
            }
            SpectralError::InvalidParameter(_) | SpectralError::TruncationTooSmall { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::CheckFailed(e.to_string()),
        }
    }
}

impl From<lamqsd::estimators::EstimatorError> for CliError {
    fn from(e: lamqsd::estimators::EstimatorError) -> Self {
        match e {
            lamqsd::estimators::EstimatorError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Other(e.into()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Uses `seed` or draws a fresh one from system entropy and reports it.
pub fn resolve_seed(seed: Option<u64>, out: &mut dyn Write) -> CliResult<u64> {
    let seed = seed.unwrap_or_else(rand::random);
    writeln!(out, "seed: {seed}").map_err(anyhow::Error::from)?;
    Ok(seed)
}

/// Runs a parsed command, writing the human-readable report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    let threads = cli.threads.map_or_else(default_threads, usize::from);
    match cli.command {
        Command::Lam(args) => commands::lam(&args, out),
        Command::Labels(args) => commands::labels(&args, threads, out),
        Command::Classify(args) => commands::classify(&args, out),
        Command::Verify(args) => verify::run(&args, threads, out),
        Command::Spectral(args) => commands::spectral(&args, out),
    }
}

/// Parses `std::env::args`, runs, and maps the outcome to an exit status.
pub fn main_with_args() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
