use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimoxr::runner::{run_all, ExperimentConfig, Overrides, Study};

#[derive(Parser)]
#[command(name = "mimoxr", version, about = "XR SLAM offloading over Massive MIMO: latency, BER sensitivity and power studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// TOML experiment configuration; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corruption trials per trajectory and BER in the sensitivity study
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Suppress progress output
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Pose correction latency per scenario and frame structure
    Latency,
    /// Localisation error versus BER per scenario
    Sensitivity,
    /// Monte-Carlo uncoded BER of the zero-forcing uplink
    Ber,
    /// Device transmit power for the target BERs
    Power,
    /// All four studies
    All,
}

impl Command {
    fn studies(self) -> Vec<Study> {
        match self {
            Command::Latency => vec![Study::Latency],
            Command::Sensitivity => vec![Study::Sensitivity],
            Command::Ber => vec![Study::Ber],
            Command::Power => vec![Study::Power],
            Command::All => Study::ALL.to_vec(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = match &cli.opts.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.opts.seed,
        out_dir: cli.opts.out.clone(),
        trials: cli.opts.trials,
    })?;
    for study in cli.command.studies() {
        if !cli.opts.quiet {
            eprintln!("running {study} study");
        }
        for path in run_all(&cfg, &[study])? {
            if !cli.opts.quiet {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
