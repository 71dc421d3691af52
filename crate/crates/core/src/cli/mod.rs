//! `wbrisk` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! non-convergence.

mod commands;
mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::backtest::{Model, DEFAULT_SIGMA_FLOOR, DEFAULT_WINDOW};
use crate::error::Error;
use crate::ingest::TRADING_DAYS;
use crate::risk::Convention;
use crate::transport::FixedPointScheme;
use crate::volatility::{EwmaInit, RISKMETRICS_ZETA};

pub use output::Format;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "wbrisk",
    version,
    about = "Wasserstein barycenter VaR, CVaR and backtests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptive statistics of log-returns per symbol.
    Stats(StatsArgs),
    /// Rolling-window VaR backtest with Kupiec tests.
    Backtest(BacktestArgs),
    /// Full-sample VaR / CVaR under every aggregator.
    Var(VarArgs),
    /// Barycenter of explicit 1D or multivariate Gaussian ensembles.
    Barycenter(BarycenterArgs),
}

/// `SYMBOL=PATH`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputSpec {
    pub symbol: String,
    pub path: PathBuf,
}

impl FromStr for InputSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('=') {
            Some((sym, path)) if !sym.is_empty() && !path.is_empty() => Ok(Self {
                symbol: sym.to_string(),
                path: PathBuf::from(path),
            }),
            _ => Err(format!("expected SYMBOL=PATH, got {s:?}")),
        }
    }
}

/// Comma-separated list of reals.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RealList(pub Vec<f64>);

impl FromStr for RealList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad number {t:?}: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(RealList)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for report files; documents go to stdout when omitted.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// `SYMBOL=PATH` of a `date,close` CSV; repeatable.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<InputSpec>,
    /// Report the first N returns and the remainder as separate periods.
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long, default_value_t = TRADING_DAYS)]
    pub trading_days: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelArg {
    WbNormal,
    WbNormalStar,
    Varcov,
    SimpleSum,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::WbNormal => Model::WbNormal,
            ModelArg::WbNormalStar => Model::WbNormalStar,
            ModelArg::Varcov => Model::Varcov,
            ModelArg::SimpleSum => Model::SimpleSum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ConventionArg {
    Quantile,
    Loss,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Quantile => Convention::Quantile,
            ConventionArg::Loss => Convention::Loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum EwmaInitArg {
    SampleSdOfWindow,
    FirstAbsReturn,
}

impl From<EwmaInitArg> for EwmaInit {
    fn from(c: EwmaInitArg) -> Self {
        match c {
            EwmaInitArg::SampleSdOfWindow => EwmaInit::SampleSdOfWindow,
            EwmaInitArg::FirstAbsReturn => EwmaInit::FirstAbsReturn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SchemeArg {
    Interpolation,
    Substitution,
}

impl From<SchemeArg> for FixedPointScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Interpolation => FixedPointScheme::Interpolation,
            SchemeArg::Substitution => FixedPointScheme::Substitution,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BacktestArgs {
    /// `SYMBOL=PATH` of a `date,close` CSV; repeatable.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<InputSpec>,
    #[arg(long = "model", value_enum, default_values_t = [ModelArg::WbNormalStar])]
    pub models: Vec<ModelArg>,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Tail level; repeatable. Defaults to 0.1, 0.05, 0.01, 0.005.
    #[arg(long = "alpha")]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = RISKMETRICS_ZETA)]
    pub zeta: f64,
    #[arg(long, value_enum, default_value_t = EwmaInitArg::SampleSdOfWindow)]
    pub ewma_init: EwmaInitArg,
    /// Portfolio weights, comma separated. Defaults to equal weights.
    #[arg(long)]
    pub weights: Option<RealList>,
    /// Barycenter weights when they should differ from the portfolio weights.
    #[arg(long)]
    pub barycenter_weights: Option<RealList>,
    #[arg(long, default_value_t = DEFAULT_SIGMA_FLOOR)]
    pub sigma_floor: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VarArgs {
    /// Price files; moments are estimated on the full sample.
    #[arg(long = "input", conflicts_with_all = ["means", "sds"])]
    pub inputs: Vec<InputSpec>,
    /// Per-asset locations (with --sds instead of --input).
    #[arg(long, requires = "sds")]
    pub means: Option<RealList>,
    #[arg(long, requires = "means")]
    pub sds: Option<RealList>,
    #[arg(long = "alpha")]
    pub alphas: Vec<f64>,
    #[arg(long)]
    pub weights: Option<RealList>,
    #[arg(long)]
    pub barycenter_weights: Option<RealList>,
    #[arg(long, value_enum, default_value_t = ConventionArg::Loss)]
    pub convention: ConventionArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BarycenterArgs {
    /// 1D locations, comma separated.
    #[arg(long, requires = "sds", conflicts_with = "covs")]
    pub means: Option<RealList>,
    /// 1D scales, comma separated.
    #[arg(long, requires = "means")]
    pub sds: Option<RealList>,
    /// CSV file holding one covariance matrix (rows of comma-separated reals); repeatable.
    #[arg(long = "cov")]
    pub covs: Vec<PathBuf>,
    /// Mean vector for the matching --cov, comma separated; repeatable. Zero when omitted.
    #[arg(long = "mean-vector")]
    pub mean_vectors: Vec<RealList>,
    #[arg(long)]
    pub weights: Option<RealList>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Interpolation)]
    pub scheme: SchemeArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A failure mapped onto the documented exit codes.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Convergence(_) => EXIT_NONCONVERGENCE,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::NonPositivePrice { .. }
            | Error::DuplicateDate { .. }
            | Error::InsufficientData { .. }
            | Error::Misaligned(_)
            | Error::NotSpd(_) => EXIT_DATA,
            Error::Domain(_)
            | Error::Simplex(_)
            | Error::DimensionMismatch { .. }
            | Error::Empty(_) => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// Runs one command, writing human output or documents to `out`.
pub fn execute(command: &Command, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match command {
        Command::Stats(a) => commands::stats(a, out),
        Command::Backtest(a) => commands::backtest(a, out),
        Command::Var(a) => commands::var(a, out),
        Command::Barycenter(a) => commands::barycenter(a, out),
    }
}
