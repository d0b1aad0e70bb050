mod config;
mod ingest;
mod outputs;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "copent",
    about = "Copula-entropy joint density fitting and T2 control limits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Input CSV with a header row naming two numeric columns
    #[arg(long)]
    data: Option<PathBuf>,
    /// Line-oriented key=value config file (flags win over it)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// First type of error for the control limit
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of power constraints in the copula fit
    #[arg(long)]
    r: Option<usize>,
    /// Comparison baseline: drop the dependence constraints and use the
    /// copula-free product of the maxent marginals
    #[arg(long)]
    baseline: bool,
    /// Quadrature order per axis for the copula fit
    #[arg(long)]
    order: Option<usize>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Marginal support for x: `auto` or `lo,hi` (hi may be `inf`)
    #[arg(long, value_name = "lo,hi|auto")]
    support_x: Option<String>,
    /// Marginal support for y: `auto` or `lo,hi` (hi may be `inf`)
    #[arg(long, value_name = "lo,hi|auto")]
    support_y: Option<String>,
    /// Dependence policy: per-stage | fixed-phase1 | fixed-all
    #[arg(long)]
    dep_policy: Option<String>,
    /// ARL replications
    #[arg(long)]
    reps: Option<usize>,
    /// Run-length cap
    #[arg(long)]
    cap: Option<usize>,
    /// Column name for x (defaults to the first column)
    #[arg(long)]
    col_x: Option<String>,
    /// Column name for y (defaults to the second column)
    #[arg(long)]
    col_y: Option<String>,
    /// Rows 1..=N are phase I; the rest are classified as phase II
    #[arg(long)]
    phase1_rows: Option<usize>,
    /// Spearman rho override (skips rank estimation)
    #[arg(long)]
    rho: Option<f64>,
    /// First Blest measure override
    #[arg(long)]
    nu1: Option<f64>,
    /// Second Blest measure override
    #[arg(long)]
    nu2: Option<f64>,
    /// Quadratic Blest measure override
    #[arg(long)]
    eta: Option<f64>,
    /// Preset dependence group 1..=5
    #[arg(long)]
    group: Option<usize>,
    /// Mean of x for simulation-style runs (no data file)
    #[arg(long)]
    mu_x: Option<f64>,
    /// Mean of y for simulation-style runs (no data file)
    #[arg(long)]
    mu_y: Option<f64>,
    /// Shift grid for the ARL table, comma separated deltas
    #[arg(long, value_name = "d1,d2,...")]
    delta_grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit marginals and the copula; write coefficient tables and a model
    Fit(CommonOpts),
    /// Fit, then solve the control design for the given alpha
    Ucl(CommonOpts),
    /// Average-run-length table over a shift grid
    Arl(CommonOpts),
    /// Iterative phase-I filtering and final design
    Phase1(CommonOpts),
    /// Control chart series (CSV + SVG)
    Chart(CommonOpts),
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (name, opts) = match &cli.command {
        Command::Fit(o) => ("fit", o),
        Command::Ucl(o) => ("ucl", o),
        Command::Arl(o) => ("arl", o),
        Command::Phase1(o) => ("phase1", o),
        Command::Chart(o) => ("chart", o),
    };
    let cfg = match RunConfig::assemble(opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(1);
        }
    };
    let run = match name {
        "fit" => outputs::cmd_fit(&cfg),
        "ucl" => outputs::cmd_ucl(&cfg),
        "arl" => outputs::cmd_arl(&cfg),
        "phase1" => outputs::cmd_phase1(&cfg),
        "chart" => outputs::cmd_chart(&cfg),
        _ => unreachable!(),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
