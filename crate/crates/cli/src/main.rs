//! `vesselfuse`: resample, enhance, partition, evaluate and phantom generation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

mod commands;
mod config;
mod error;
mod provenance;

use config::PipelineConfig;
use error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "vesselfuse", version, about = "Vesselness fusion and topology-aware vessel evaluation")]
struct Cli {
    /// Worker threads; defaults to the machine parallelism. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Pipeline configuration file (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resample a volume or mask onto a new spacing.
    Resample(commands::resample::ResampleArgs),
    /// Build the seven-channel hyper-volume of a scan.
    Enhance(commands::enhance::EnhanceArgs),
    /// Skeletonize a ground truth mask and write its size-partition masks.
    Partition(commands::partition::PartitionArgs),
    /// Score predictions against ground truth, globally and per region.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Generate a synthetic phantom with its exact mask.
    Phantom(commands::phantom::PhantomArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    match cli.config.as_deref() {
        Some(p) => info!("config {}:\n{}", p.display(), cfg.to_toml()),
        None => info!("no config file, using built-in defaults:\n{}", cfg.to_toml()),
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    pool.build_global().map_err(|e| CliError::Internal(e.into()))?;
    info!("using {} worker threads", rayon::current_num_threads());

    match cli.command {
        Command::Resample(a) => a.run(&cfg),
        Command::Enhance(a) => a.run(&cfg),
        Command::Partition(a) => a.run(&cfg),
        Command::Evaluate(a) => a.run(&cfg),
        Command::Phantom(a) => a.run(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
