mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Trust-region surrogate toolkit.
#[derive(Debug, Parser)]
#[command(name = "mars", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed override for commands that consume randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run config with `[trust_region]`, `[trainer]` and `[env]` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write objective and ratio-gradient curves over a log-spaced grid.
    Analyze(AnalyzeArgs),
    /// Run the property suites and print a JSON report.
    Verify(VerifyArgs),
    /// Train one run, or one run per seed with `--seeds a..b`.
    Train(TrainArgs),
    /// Aggregate run and probe directories into report files.
    Report(ReportArgs),
    /// Run the fixed-advantage bandit probe.
    Probe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Variant name or `all`. Ignored when `--config` supplies a trust region.
    #[arg(long, default_value = "mars")]
    variant: String,
    #[arg(long, allow_hyphen_values = true)]
    adv: f64,
    /// `lo,hi,count`.
    #[arg(long, default_value = "0.01,3,300")]
    range: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    /// Replace a checked function with a corrupted one (`penalty`).
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Half-open seed range, e.g. `0..5`; runs go to `<out>/seed_<k>`.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run or probe directories, or parents of them.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long, default_value_t = mars_core::metrics::DEFAULT_RESAMPLES)]
    resamples: usize,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, default_value = "mars")]
    variant: String,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    adv: f64,
    #[arg(long, default_value_t = 10)]
    steps_per_update: usize,
}

/// Exit codes: 0 success, 1 failed check or run, 2 usage or config error.
pub enum Failure {
    Check(String),
    Usage(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        match e.downcast_ref::<mars_core::Error>() {
            Some(mars_core::Error::NonFinite { .. }) | Some(mars_core::Error::Env(_)) => {
                Failure::Check(format!("{e:#}"))
            }
            _ => Failure::Usage(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => commands::analyze(&cli, a),
        Command::Verify(a) => commands::verify(&cli, a),
        Command::Train(a) => commands::train(&cli, a),
        Command::Report(a) => commands::report(&cli, a),
        Command::Probe(a) => commands::probe(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
