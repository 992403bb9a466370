//! Command line harness: run seeded experiments, evaluate saved models,
//! and aggregate force-torque logs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cotrust::config::ExperimentConfig;
use cotrust::csvio::fmt_f64;
use cotrust::experiment::{eval_recovery, run_experiment};
use cotrust::ftstats::{analyze, render_stats};
use cotrust::learner::ConstraintModel;
use cotrust::Error;

#[derive(Parser)]
#[command(name = "cotrust", version, about = "Shared-autonomy simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded experiment and write metrics, FT log, and checkpoint.
    Simulate {
        /// Experiment config file (flat dotted keys, one `key = value` per line).
        #[arg(long)]
        config: PathBuf,
        /// Seed for the run; overrides `run.seed` from the config file.
        #[arg(long)]
        seed: u64,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model against the profile described by a config.
    Eval {
        /// Checkpoint written by `simulate`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config providing the profile, grids, and evaluation settings.
        #[arg(long)]
        config: PathBuf,
    },
    /// Aggregate a force-torque log into per-step channel statistics.
    AnalyzeFt {
        /// FT log CSV written by `simulate`.
        #[arg(long)]
        log: PathBuf,
        /// Number of runs the log must contain.
        #[arg(long)]
        runs: usize,
        /// Destination for the statistics CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out),
        Command::Eval { checkpoint, config } => eval(&checkpoint, &config),
        Command::AnalyzeFt { log, runs, out } => analyze_ft(&log, runs, &out),
    }
}

fn simulate(config: &PathBuf, seed: u64, out: &PathBuf) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.run.seed = seed;
    let result = run_experiment(&cfg)?;
    result.write_to(out)?;

    let last = result.metrics.last();
    println!(
        "episodes={} boundary_est={} fallback_steps={}",
        result.metrics.len(),
        last.map(|r| fmt_f64(r.boundary_est)).unwrap_or_default(),
        result.fallback_steps,
    );
    Ok(())
}

fn eval(checkpoint: &PathBuf, config: &PathBuf) -> Result<(), Error> {
    let (model, _echo) = ConstraintModel::load_from_path(checkpoint)?;
    let cfg = ExperimentConfig::load(config)?;
    let (accuracy, boundary_error) = eval_recovery(&model, &cfg.human, &cfg, cfg.run.eval_points);
    println!("accuracy={}", fmt_f64(accuracy));
    println!("boundary_error={}", fmt_f64(boundary_error));
    Ok(())
}

fn analyze_ft(log: &PathBuf, runs: usize, out: &PathBuf) -> Result<(), Error> {
    let rows = cotrust::ftstats::parse_ft_log_path(log)?;
    let (stats, warnings) = analyze(&rows, runs)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    std::fs::write(out, render_stats(&stats)).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    Ok(())
}
