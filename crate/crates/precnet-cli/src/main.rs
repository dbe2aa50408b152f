//! Command-line front end for sparse precision matrix estimation: fit a
//! matrix from CSV observations, run simulation benchmarks, forecast late
//! coordinates from early ones, or train a penalized LDA classifier.

mod commands;
mod config;
mod fmt;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "precnet",
    version,
    about = "Sparse precision matrix estimation for Gaussian graphical models"
)]
struct Cli {
    /// Worker threads for cross-validation and replications
    /// (default: PRECNET_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a sparse precision matrix from observations in a CSV file.
    Estimate(EstimateArgs),
    /// Run a simulation benchmark described by a config file.
    Simulate(SimulateArgs),
    /// Forecast the late block of each test row from its early block.
    Forecast(ForecastArgs),
    /// Feature-screened, penalized linear discriminant classification.
    Classify(ClassifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PenaltyArg {
    Lasso,
    /// Adaptive lasso.
    Alasso,
    Scad,
}

/// Initial value for the reweighted penalties (SCAD, adaptive lasso).
#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum InitArg {
    /// Inverse sample covariance when well-posed, lasso estimate otherwise.
    Auto,
    /// Always the lasso estimate at the same lambda.
    Lasso,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Input CSV, one observation per row; a non-numeric first row is a header.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "lasso")]
    pub penalty: PenaltyArg,
    /// Fixed regularization level.
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Select lambda by K-fold cross-validation.
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    /// Comma-separated lambda grid for --cv (default: 20 log-spaced points).
    #[arg(long)]
    pub grid: Option<String>,
    /// SCAD shape parameter.
    #[arg(long, default_value_t = precnet::penalties::DEFAULT_SCAD_A)]
    pub scad_a: f64,
    /// Adaptive-lasso weight exponent.
    #[arg(long, default_value_t = precnet::penalties::DEFAULT_ADAPTIVE_GAMMA)]
    pub gamma: f64,
    /// Initial value for SCAD / adaptive-lasso reweighting.
    #[arg(long, value_enum, default_value = "auto")]
    pub init: InitArg,
    /// Sparsity threshold for the reported pattern.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Leave diagonal entries unpenalized.
    #[arg(long)]
    pub no_diagonal_penalty: bool,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Experiment config file (key = value lines).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ForecastArgs {
    /// Training CSV used for the mean and the precision matrix.
    #[arg(long)]
    pub train: PathBuf,
    /// Test CSV with the same columns; the first --split columns feed the
    /// forecast, the rest score it.
    #[arg(long)]
    pub test: PathBuf,
    /// Number of leading coordinates treated as observed.
    #[arg(long)]
    pub split: usize,
    /// Precision matrix CSV to use instead of estimating one.
    #[arg(long)]
    pub omega: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "scad")]
    pub penalty: PenaltyArg,
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = precnet::penalties::DEFAULT_SCAD_A)]
    pub scad_a: f64,
    #[arg(long, default_value_t = precnet::penalties::DEFAULT_ADAPTIVE_GAMMA)]
    pub gamma: f64,
    /// Initial value for SCAD / adaptive-lasso reweighting.
    #[arg(long, value_enum, default_value = "auto")]
    pub init: InitArg,
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ClassifyArgs {
    /// Training CSV, one sample per row.
    #[arg(long)]
    pub train: PathBuf,
    /// Training labels (single column of 0/1).
    #[arg(long)]
    pub labels: PathBuf,
    /// Test CSV with the same columns.
    #[arg(long)]
    pub test: PathBuf,
    /// Test labels; when given, metrics.json reports specificity,
    /// sensitivity and MCC against them (label 1 is the positive class).
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Number of features kept by the t-test screen (clamped to p).
    #[arg(long)]
    pub select: usize,
    #[arg(long, value_enum, default_value = "scad")]
    pub penalty: PenaltyArg,
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = precnet::penalties::DEFAULT_SCAD_A)]
    pub scad_a: f64,
    #[arg(long, default_value_t = precnet::penalties::DEFAULT_ADAPTIVE_GAMMA)]
    pub gamma: f64,
    /// Initial value for SCAD / adaptive-lasso reweighting.
    #[arg(long, value_enum, default_value = "auto")]
    pub init: InitArg,
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// CLI failures with their exit codes: 2 for anything wrong with the
/// invocation or its inputs, 1 for solver failures on valid inputs.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse {
        path: PathBuf,
        line: usize,
        col: usize,
        msg: String,
    },
    Config {
        path: PathBuf,
        msg: String,
    },
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// The optimizer failed on otherwise valid input.
    Solver(precnet::Error),
    /// Library-level input validation failed.
    Input(precnet::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 1,
            _ => 2,
        }
    }

    /// Single-line diagnostic with a machine-parsable `error:<kind>:` prefix.
    fn diagnostic(&self) -> String {
        match self {
            CliError::Usage(msg) => format!("error:usage: {msg}"),
            CliError::Parse {
                path,
                line,
                col,
                msg,
            } => format!("error:parse: {}:{line}:{col}: {msg}", path.display()),
            CliError::Config { path, msg } => {
                format!("error:config: {}: {msg}", path.display())
            }
            CliError::Io { path, source } => {
                format!("error:io: {}: {source}", path.display())
            }
            CliError::Solver(e) => format!("error:solver: {e}"),
            CliError::Input(e) => format!("error:input: {e}"),
        }
    }
}

/// Maps library errors onto exit-code categories.
pub fn lib_err(e: precnet::Error) -> CliError {
    match e {
        precnet::Error::NotPositiveDefinite { .. } => CliError::Solver(e),
        _ => CliError::Input(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("PRECNET_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .ok();
    }

    let result = match &cli.command {
        Command::Estimate(args) => commands::cmd_estimate(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Forecast(args) => commands::cmd_forecast(args),
        Command::Classify(args) => commands::cmd_classify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code())
        }
    }
}
