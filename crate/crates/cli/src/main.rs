use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regretcal::commands::{self, Method};
use regretcal::config::{self, RunConfig};
use regretcal::error::AppError;

/// Quantify the expected-utility regret of thresholded decisions made from
/// a probabilistic classifier, split it into the part recalibration can fix
/// and the part it cannot, and apply post-training corrections.
#[derive(Parser)]
#[command(name = "regretcal", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PipelineArgs {
    /// Input dataset (.csv with y,score,f0.. or .jsonl)
    #[arg(long)]
    input: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Number of equal-mass score bins
    #[arg(long, default_value_t = 15)]
    bins: usize,
    /// Maximum feature-space regions per bin
    #[arg(long, default_value_t = 5)]
    max_leaves: usize,
    /// Minimum samples per tree leaf
    #[arg(long, default_value_t = 10)]
    min_leaf: usize,
    /// Regret gate for GLAR corrections and advisory verdicts
    #[arg(long, default_value_t = 0.02)]
    glar_gate: f64,
    /// Comma-separated decision thresholds t* (defaults to the 11-value
    /// grid); exclusive with --utility
    #[arg(long, conflicts_with = "utility")]
    tstar: Option<String>,
    /// Explicit payoff table u00,u01,u10,u11; exclusive with --tstar
    #[arg(long)]
    utility: Option<String>,
    /// Seed for the fold split
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of data used for fitting (the rest evaluates)
    #[arg(long, default_value_t = 0.5)]
    fit_fraction: f64,
    /// Name prefix of feature columns in CSV input
    #[arg(long, default_value = "f")]
    feature_prefix: String,
}

impl PipelineArgs {
    fn into_config(self) -> Result<RunConfig, AppError> {
        let t_stars = match self.tstar.as_deref() {
            Some(raw) => config::parse_f64_list(raw)?,
            None => config::default_t_stars(),
        };
        let utility = self
            .utility
            .as_deref()
            .map(config::parse_utility)
            .transpose()?;
        Ok(RunConfig {
            input: self.input,
            out: self.out,
            bins: self.bins,
            max_leaves: self.max_leaves,
            min_leaf: self.min_leaf,
            glar_gate: self.glar_gate,
            t_stars,
            utility,
            seed: self.seed,
            fit_fraction: self.fit_fraction,
            feature_prefix: self.feature_prefix,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Regret report with per-bin bounds, baseline metrics, and plots
    Report(PipelineArgs),
    /// Fit a post-training correction and measure its utility gain
    Posttrain {
        #[command(flatten)]
        args: PipelineArgs,
        /// Correction to apply
        #[arg(long, value_enum)]
        method: Method,
    },
    /// Sample a dataset from an exact synthetic oracle
    Simulate {
        /// Oracle spec JSON ({"kind": "lower_tight"|"upper_tight"|"random", ...})
        #[arg(long)]
        spec: PathBuf,
        /// Number of samples to draw
        #[arg(long)]
        n: usize,
        /// Sampling seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// One-line verdict: is the classifier worth post-training, and how
    Advise(PipelineArgs),
    /// Correlate regret estimators with realized post-training gains over a
    /// suite of synthetic configurations
    Sweep {
        /// Suite JSON ({"runs": [{...}], ...})
        #[arg(long)]
        suite: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn threads_from_env() -> Result<Option<usize>, AppError> {
    match std::env::var("REGRETCAL_THREADS") {
        Ok(raw) => raw
            .parse::<usize>()
            .map(Some)
            .map_err(|_| AppError::config("REGRETCAL_THREADS must be an integer")),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Report(args) => commands::cmd_report(&args.into_config()?),
        Command::Posttrain { args, method } => {
            commands::cmd_posttrain(&args.into_config()?, method)
        }
        Command::Simulate { spec, n, seed, out } => commands::cmd_simulate(&spec, n, seed, &out),
        Command::Advise(args) => commands::cmd_advise(&args.into_config()?),
        Command::Sweep { suite, out } => commands::cmd_sweep(&suite, &out, threads_from_env()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
