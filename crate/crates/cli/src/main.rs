//! Command-line driver: one-shot intervals, critical-value simulation and
//! batch coverage experiments.

mod commands;
mod data;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isoci::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "isoci", version, about = "Pointwise confidence intervals for monotone regression and related models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Intervals for isotonic regression from a CSV of covariates and a response.
    Ci(CiArgs),
    /// Monte Carlo critical values on a regular lattice.
    SimulateCriticalValues(SimulateArgs),
    /// Coverage experiment from a JSON config.
    Coverage(ExperimentArgs),
    /// Interval length against sample size from a JSON config.
    LengthStudy(LengthArgs),
    /// Paired run of the block-average and max-min-only intervals.
    CompareEstimators(ExperimentArgs),
    /// Paired run of the pivotal and likelihood-ratio intervals.
    CompareBw(ExperimentArgs),
    /// Monotone density intervals from a column of positive observations.
    GrenanderCi(GrenanderArgs),
    /// Distribution-function intervals from current status data.
    CurrentStatusCi(ModelArgs),
    /// Mean-function intervals from long-format panel count data.
    PanelCountCi(ModelArgs),
    /// Intervals for a monotone mean in an exponential family.
    GlmCi(GlmArgs),
    /// Likelihood-ratio intervals for one-dimensional isotonic regression.
    BwCi(BwArgs),
}

#[derive(Args)]
struct Output {
    /// CSV output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run metadata path.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct Critical {
    /// Critical value; looked up from the table by dimension and delta when absent.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// CSV table with columns d,delta,c,provenance,stderr,seed,B.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Auto,
    Lattice,
    Scatter,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum VarianceArg {
    /// Difference estimator when the design allows it, local block otherwise.
    Auto,
    Difference,
    LocalBlock,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Pivotal,
    MaxMinOnly,
    CvAdjusted,
}

#[derive(Args)]
struct CiArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long, value_enum, default_value = "auto")]
    design: DesignArg,
    /// Query point as comma-separated coordinates; repeatable. All design points when absent.
    #[arg(long, value_parser = parse_point)]
    x0: Vec<Vec<f64>>,
    /// Known noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    variance: VarianceArg,
    #[arg(long, value_enum, default_value = "pivotal")]
    method: MethodArg,
    #[command(flatten)]
    critical: Critical,
    /// Replications for the recalibrated critical value.
    #[arg(long = "replications", visible_alias = "B", default_value_t = 2000)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    Pivot,
    ScaledError,
}

#[derive(Args)]
struct SimulateArgs {
    /// Lattice shape such as 100 or 50x50.
    #[arg(long)]
    grid: String,
    /// Expected dimension, checked against the grid.
    #[arg(long)]
    dim: Option<usize>,
    /// Truth as an expression in x (or x1, x2, x3).
    #[arg(long)]
    f0: String,
    /// Query point; the center of the cube when absent.
    #[arg(long, value_parser = parse_point)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long = "replications", visible_alias = "B", default_value_t = 2000)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.10")]
    deltas: Vec<f64>,
    #[arg(long, value_enum, default_value = "pivot")]
    statistic: StatisticArg,
    /// Partial derivatives at x0 for the scaled error; taken from f0 when absent.
    #[arg(long, value_parser = parse_point)]
    partials: Option<Vec<f64>>,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Summary CSV path.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "replications", visible_alias = "B")]
    replications: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct LengthArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    n: Vec<usize>,
}

#[derive(Args)]
struct GrenanderArgs {
    #[arg(long)]
    data: PathBuf,
    /// Column holding the observations; the first column when absent.
    #[arg(long)]
    column: Option<String>,
    /// Query points; repeatable or comma-separated. Every distinct observation when absent.
    #[arg(long, value_delimiter = ',')]
    x0: Vec<f64>,
    #[command(flatten)]
    critical: Critical,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    data: PathBuf,
    /// Query times; every distinct observation time when absent.
    #[arg(long, value_delimiter = ',')]
    x0: Vec<f64>,
    #[command(flatten)]
    critical: Critical,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Bernoulli,
    Poisson,
}

#[derive(Clone, Copy, ValueEnum)]
enum GlmVarianceArg {
    Family,
    LocalBlock,
}

#[derive(Args)]
struct GlmArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "family")]
    variance: GlmVarianceArg,
    #[arg(long, value_delimiter = ',')]
    x0: Vec<f64>,
    #[command(flatten)]
    critical: Critical,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BwArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long, value_delimiter = ',')]
    x0: Vec<f64>,
    /// Quantile of the limiting likelihood-ratio statistic.
    #[arg(long, visible_alias = "ddelta", default_value_t = isoci::lrt::BW_DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Known noise standard deviation; the difference estimator when absent.
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    output: Output,
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

/// 2 for bad input, 3 for too many failed replications, 1 otherwise.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ReplicationFailures { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ci(a) => commands::ci(a),
        Command::SimulateCriticalValues(a) => commands::simulate(a),
        Command::Coverage(a) => commands::experiment("coverage", a),
        Command::LengthStudy(a) => commands::length_study(a),
        Command::CompareEstimators(a) => commands::experiment("compare-estimators", a),
        Command::CompareBw(a) => commands::experiment("compare-bw", a),
        Command::GrenanderCi(a) => commands::grenander(a),
        Command::CurrentStatusCi(a) => commands::current_status(a),
        Command::PanelCountCi(a) => commands::panel_count(a),
        Command::GlmCi(a) => commands::glm(a),
        Command::BwCi(a) => commands::bw(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
