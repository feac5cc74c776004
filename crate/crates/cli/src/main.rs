//! `rwre`: run simulations, cluster sweeps and the acceptance suite from a
//! JSON config, writing results under `<out>/<config hash>/`.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rwre_core::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "rwre", version, about = "Random walks in random environments: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate walks on fresh environments for every N in the ladder.
    Simulate(Common),
    /// Detect clusters and attach marks for every N and delta.
    Clusters(Common),
    /// Run the acceptance suite and write a manifest with the verdicts.
    Verify(Selection),
    /// Write the acceptance tables without judging them.
    Tables(Selection),
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON); the built-in default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Output root; results go to `<out>/<config hash>/`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Selection {
    #[command(flatten)]
    common: Common,
    /// Comma-separated criterion ids; all when omitted.
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rwre_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Setup(String),
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(w) = common.workers {
        config.workers = Some(w);
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(w) = config.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Setup(format!("worker pool: {e}")))?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&load(&c)?).map(|_| true),
        Command::Clusters(c) => commands::clusters(&load(&c)?).map(|_| true),
        Command::Verify(s) => commands::verify(&load(&s.common)?, &s.criteria),
        Command::Tables(s) => commands::tables(&load(&s.common)?, &s.criteria).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
