use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use qbattery_cli::{emit, run, ConfigError, ExperimentConfig, Format};

/// Run one qbattery experiment from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "qbattery", version, about)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output table path; CSV output also writes `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grid fan-out (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
    Output(anyhow::Error),
}

fn load(args: &Args) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| ConfigError(format!("reading {}: {e}", args.config.display())))?;
    Ok(ExperimentConfig::from_json(&text, args.seed)?)
}

fn execute(args: &Args) -> Result<(), Failure> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")
            .map_err(Failure::Config)?;
    }
    let config = load(args).map_err(Failure::Config)?;
    let started = Instant::now();
    let table = run(&config).with_context(|| format!("{} failed", config.kind.name())).map_err(Failure::Numerical)?;
    let written = emit(&table, &args.out, args.format).map_err(Failure::Output)?;
    // wall time stays out of the output files so reruns are byte-identical
    eprintln!("{}: {} rows in {:.2?}", config.kind.name(), table.rows.len(), started.elapsed());
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Output(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
