//! `structinfer`: structured-sparsity fits, de-sparsified inference and the
//! Toeplitz coverage study from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::CliError;

#[derive(Parser, Debug)]
#[command(name = "structinfer", version, about = "Structured-sparsity regression and de-sparsified inference")]
struct Cli {
    /// Worker threads (0 = all cores). Falls back to STRUCTINFER_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "structinfer-out")]
    pub out: PathBuf,
    /// Override a configuration entry, e.g. `--set norm.kind="slope"` or
    /// `--set lambda=0.3`. Values are parsed as JSON, falling back to a
    /// plain string. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV with a header `y,x1,...,xp`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    #[command(flatten)]
    pub common: Common,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the penalized least-squares estimator; writes fit.json.
    Fit(DataArgs),
    /// De-sparsify the requested coordinate sets; writes desparsified.json.
    Desparsify(DataArgs),
    /// Confidence intervals and group regions; writes regions.csv.
    Ci(DataArgs),
    /// Run one coverage scenario; writes results.csv, raw_log.csv and
    /// diagnostics.csv.
    Simulate(SimArgs),
    /// Run both nodewise frameworks on a shared scenario; additionally
    /// writes comparison.csv (and sweep.csv when `sweep` is set).
    Compare(SimArgs),
    /// Evaluate norms directly.
    Normtool(NormArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum NormOp {
    Eval,
    Prox,
    Dual,
    Gauge,
}

#[derive(Args, Debug, Clone)]
pub struct NormArgs {
    pub op: NormOp,
    /// l1, slope, group_lasso, wedge, group_wedge, lorentz or
    /// generalized_lorentz.
    #[arg(long)]
    pub kind: String,
    /// Comma-separated input vector (β, v or z); also fixes the dimension.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: String,
    /// Prox step.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long)]
    pub weights: Option<String>,
    /// Groups as `0,1;2,3`.
    #[arg(long)]
    pub groups: Option<String>,
    #[arg(long)]
    pub protected: Option<String>,
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("STRUCTINFER_THREADS") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("STRUCTINFER_THREADS must be an integer, got {v:?}")))?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Desparsify(a) => commands::desparsify(&a),
        Command::Ci(a) => commands::ci(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Normtool(a) => commands::normtool(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return CliError::usage(first.to_string()).report();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
