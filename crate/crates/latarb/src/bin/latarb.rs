//! Thin command-line front end for the pipeline.
//!
//! All logic lives in the library; this binary parses flags, applies
//! overrides, and maps errors to exit codes (0 ok, 1 validation,
//! 2 runtime).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use latarb::pipeline::{self, PipelineConfig, Stage};

#[derive(Parser)]
#[command(
    name = "latarb",
    about = "Arbitrage bounds under stochastic settlement latency",
    version
)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "latarb.toml")]
    config: PathBuf,
    /// First day to process, YYYY-MM-DD (inclusive).
    #[arg(long, global = true)]
    from: Option<String>,
    /// Last day to process, YYYY-MM-DD (inclusive).
    #[arg(long, global = true)]
    to: Option<String>,
    /// Risk-aversion grid, e.g. --gamma 2,4,8.
    #[arg(long, global = true, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Random seed for everything stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Fail on any malformed input row instead of dropping it.
    #[arg(long, global = true)]
    strict: bool,
    /// Diagnostics only: allow same-day latency models.
    #[arg(long, global = true)]
    allow_lookahead: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize the raw input files.
    Ingest,
    /// Estimate per-minute spot volatilities.
    Vol,
    /// Fit daily duration models and block-time statistics.
    Latency,
    /// Compute per-minute arbitrage bounds and the per-exchange summary.
    Bounds,
    /// Price differences in excess of the bounds.
    Excess,
    /// Implied risk aversion per minute and per day.
    ImpliedGamma,
    /// Run the Monte Carlo oracle checks.
    Simulate,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let stage = match cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Vol => Stage::Vol,
        Command::Latency => Stage::Latency,
        Command::Bounds => Stage::Bounds,
        Command::Excess => Stage::Excess,
        Command::ImpliedGamma => Stage::ImpliedGamma,
        Command::Simulate => Stage::Simulate,
    };

    let mut cfg = match PipelineConfig::from_toml_path(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.from.is_some() {
        cfg.from = cli.from;
    }
    if cli.to.is_some() {
        cfg.to = cli.to;
    }
    if let Some(gamma) = cli.gamma {
        cfg.gamma = gamma;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    cfg.strict |= cli.strict;
    cfg.allow_lookahead |= cli.allow_lookahead;

    if cfg.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }

    match pipeline::run(stage, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
