use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use deeptensor::bench::{run_bench, run_decompose, BenchKind};
use deeptensor::io::ExperimentConfig;

#[derive(Parser)]
#[command(name = "deeptensor", version, about = "Low-rank tensor decomposition with generative networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one decomposition per seed.
    Decompose(Opts),
    /// Denoising under several signal and noise pairings.
    BenchNoise(Opts),
    /// Principal subspace recovery against PCA.
    BenchPca(Opts),
    /// Learning-rate schedules on the toy task.
    BenchLr(Opts),
    /// Best epoch against noise level.
    BenchStop(Opts),
    /// Sensitivity to the decomposition rank.
    BenchRank(Opts),
    /// Time per epoch of the 3-D parametrizations.
    BenchTiming(Opts),
    /// Nonnegative factorization with constrained outputs.
    BenchNmf(Opts),
    /// Coded exposure and sparse-view CT recovery.
    BenchInverse(Opts),
}

#[derive(clap::Args)]
struct Opts {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reduced sweep.
    #[arg(long)]
    quick: bool,
    /// Output directory (default: the config's out_dir, else results/<task>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this single seed instead of the configured ones.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(&self) -> (&'static str, &Opts) {
        match self {
            Command::Decompose(o) => ("decompose", o),
            Command::BenchNoise(o) => ("bench-noise", o),
            Command::BenchPca(o) => ("bench-pca", o),
            Command::BenchLr(o) => ("bench-lr", o),
            Command::BenchStop(o) => ("bench-stop", o),
            Command::BenchRank(o) => ("bench-rank", o),
            Command::BenchTiming(o) => ("bench-timing", o),
            Command::BenchNmf(o) => ("bench-nmf", o),
            Command::BenchInverse(o) => ("bench-inverse", o),
        }
    }
}

fn load_config(task: &str, opts: &Opts) -> Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::for_task(task),
    };
    cfg.task = task.to_string();
    if opts.quick {
        cfg.bench.quick = true;
    }
    if let Some(s) = opts.seed {
        cfg.seeds = Some(vec![s]);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (task, opts) = cli.command.split();
    let cfg = load_config(task, opts)?;
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| Path::new("results").join(task));
    let paths = match BenchKind::from_name(task) {
        Some(kind) => run_bench(kind, &cfg)?.write(&out)?,
        None => run_decompose(&cfg)?.write(&out)?,
    };
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
