use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;
mod input;

#[derive(Parser)]
#[command(name = "reconfig", version, about = "Plan coding-scheme reconfiguration over a device lifetime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit BER polynomials to samples and rank degrees by MSE, or print a built-in curve set.
    Fit(FitArgs),
    /// Solve an offline planning problem.
    Solve(SolveArgs),
    /// Simulate an online setup, or plan from already fitted curves.
    Online(OnlineArgs),
    /// Compare plans against the equal-share and prior-work baselines.
    Compare(CompareArgs),
    /// Emit the active scheme and its BER across the density range.
    Trace(TraceArgs),
}

/// Where the four BER curves come from; exactly one source.
#[derive(Args, Clone, Debug, Serialize)]
pub struct CurveArgs {
    /// Built-in curve set (paper-offline-mt, paper-offline-mt-printed, ...).
    #[arg(long, conflicts_with_all = ["curves", "data"])]
    pub fixture: Option<String>,
    /// Curve document with `[[curve]]` tables.
    #[arg(long, conflicts_with = "data")]
    pub curves: Option<PathBuf>,
    /// Sample file for one scheme, as SCHEME=PATH; repeat for each scheme.
    #[arg(long, value_name = "SCHEME=PATH")]
    pub data: Vec<String>,
    /// Polynomial degree used when fitting --data samples.
    #[arg(long, default_value_t = 7)]
    pub degree: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct RangeArgs {
    /// BER threshold.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    /// First density of the lifetime.
    #[arg(long, default_value_t = 0.8)]
    pub d0: f64,
    /// End-of-life density.
    #[arg(long, default_value_t = 1.5)]
    pub d1: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// Scheme the samples belong to.
    #[arg(long, requires = "data")]
    pub scheme: Option<String>,
    /// CSV with header `density,ber`.
    #[arg(long, requires = "scheme", conflicts_with = "fixture")]
    pub data: Option<PathBuf>,
    /// Candidate degrees.
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub degrees: Vec<usize>,
    /// Print a built-in curve set instead of fitting.
    #[arg(long, required_unless_present = "data")]
    pub fixture: Option<String>,
    /// Output directory; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub curves: CurveArgs,
    #[command(flatten)]
    pub range: RangeArgs,
    /// 1: max capacity, 2: capacity/complexity tradeoff, 3: adder budget.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub problem: u8,
    /// Tradeoff weight for problem 2.
    #[arg(long, required_if_eq("problem", "2"))]
    pub c: Option<f64>,
    /// Average adder budget for problem 3.
    #[arg(long, required_if_eq("problem", "3"))]
    pub z: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct OnlineArgs {
    /// Truth curves: the noiseless oracle and the violation reference.
    #[command(flatten)]
    pub curves: CurveArgs,
    #[command(flatten)]
    pub range: RangeArgs,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub setup: Option<u8>,
    /// Setup document overriding the standard region rules.
    #[arg(long, conflicts_with = "setup")]
    pub setup_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Log-normal noise sigma on oracle readings.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Recorded device log (`scheme,density,ber`) used as the oracle.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Offline switch densities for setups 1-3; solved from the truth curves when absent.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub switches: Option<Vec<f64>>,
    /// Already fitted OP, SP, OT curves (built-in name or curve document); skips sampling.
    #[arg(long, conflicts_with_all = ["log", "setup_config"])]
    pub fits: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub curves: CurveArgs,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Extra tradeoff plans to include.
    #[arg(long, value_delimiter = ',')]
    pub c: Vec<f64>,
    /// Extra adder-budget plans to include.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<f64>,
    /// Plan documents written by `solve` or `online`.
    #[arg(long)]
    pub plan: Vec<PathBuf>,
    /// Entry the deltas are measured against.
    #[arg(long, default_value = "prior-work")]
    pub reference: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TraceArgs {
    #[command(flatten)]
    pub curves: CurveArgs,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Plan document; the problem-1 plan is used when neither this nor --shares is given.
    #[arg(long, conflicts_with = "shares")]
    pub plan: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub shares: Option<Vec<f64>>,
    #[arg(long, default_value_t = reconfig_core::evaluate::DEFAULT_TRACE_STEP)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = err
        .chain()
        .filter_map(|e| e.downcast_ref::<reconfig_core::Error>())
        .any(reconfig_core::Error::is_infeasible);
    if infeasible {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Solve(a) => commands::solve(a),
        Command::Online(a) => commands::online(a),
        Command::Compare(a) => commands::compare(a),
        Command::Trace(a) => commands::trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
