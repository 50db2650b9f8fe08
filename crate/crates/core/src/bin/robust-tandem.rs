use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use robust_tandem::optimize::Objective;
use robust_tandem::runner::{run, Command, ExperimentConfig, Preset, RunOptions};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Lfd,
    Chain,
    Optimize,
    Simulate,
    Figure,
}

/// Robust hypothesis testing over tandem networks.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Experiment config (JSON), or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fig-rules, fig-mean or fig-eps (for `figure`).
    #[arg(long)]
    preset: Option<String>,
    /// Prefix prepended to every output file name.
    #[arg(long)]
    out: Option<String>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// finite-dd, asymptotic-dd or unknown-sl.
    #[arg(long)]
    objective: Option<String>,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("RT_THREADS") {
        let n: usize = n.parse().context("RT_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    if let (Some(c), Some(seed)) = (cfg.as_mut(), cli.seed) {
        c.seed = seed;
    }
    let opts = RunOptions {
        objective: cli.objective.as_deref().map(str::parse::<Objective>).transpose()?,
        preset: cli.preset.as_deref().map(str::parse::<Preset>).transpose()?,
    };
    let command = match cli.command {
        Cmd::Lfd => Command::Lfd,
        Cmd::Chain => Command::Chain,
        Cmd::Optimize => Command::Optimize,
        Cmd::Simulate => Command::Simulate,
        Cmd::Figure => Command::Figure,
    };
    let prefix = cli
        .out
        .or_else(|| cfg.as_ref().and_then(|c| c.out.clone()))
        .unwrap_or_else(|| "out/".into());
    let output = run(command, cfg, &opts, &prefix)?;
    print!("{}", output.stdout);
    Ok(())
}
