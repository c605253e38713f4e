//! `verify`: runs the randomized verification suites from a JSON config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use jetgauge::harness::{emit, run_config, Config, Format, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "verify", version, about = "Randomized verification of jet-groupoid gauge identities")]
struct Cli {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Suite to run on every scenario, or `all` for each scenario's own list.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Record wall time in the report (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

fn run(cli: Cli) -> jetgauge::Result<bool> {
    let config = Config::load(&cli.config)?;
    let opts = RunOptions { suite: Some(cli.suite), seed: cli.seed, timing: cli.timing, ..Default::default() }
        .with_env()?;
    let outcome = run_config(&config, &opts)?;
    if let (Some(ledger), Some(path)) = (outcome.pinned, &config.conventions) {
        ledger.save(path)?;
    }
    let format = match cli.format {
        OutputFormat::Json => Format::Json,
        OutputFormat::Csv => Format::Csv,
    };
    emit(&outcome.report, format, &cli.out)?;
    for c in outcome.report.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "FAIL {} {} {}: max residual {:e} > {:e}",
            c.scenario, c.suite, c.check, c.max_residual, c.tolerance
        );
    }
    Ok(outcome.report.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
