use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use memsynapse_cli::{run, CliError, Experiment, ExperimentConfig};

/// Simulate and analyze the 3T1R memristive synapse.
#[derive(Debug, Parser)]
#[command(name = "memsynapse", version)]
struct Args {
    /// Experiment to run; defaults to the one named in the configuration.
    #[arg(value_enum)]
    experiment: Option<Experiment>,

    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Root directory for run outputs.
    #[arg(long, env = "MEMSYNAPSE_OUT")]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for Monte Carlo and training.
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve(args: Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = args.experiment {
        cfg.experiment = e;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match resolve(args).and_then(|cfg| run(&cfg)) {
        Ok(outcome) => {
            println!("{}", outcome.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
