use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use handover_core::{load_config, run_experiment, ExperimentConfig, ExperimentKind};

/// Handover experiments for multicast mobility schemes. Results are CSV.
#[derive(Parser, Debug)]
#[command(name = "mcast-ho", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form tables (handover probabilities, loss windows, overhead).
    Analytic(RunArgs),
    /// Stochastic handover sweep over router distance.
    Handover(RunArgs),
    /// Prediction outcomes and handover counts on the honeycomb grid.
    Mobility(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long, short)]
    config: Option<String>,
    /// Master seed; overrides the configuration file.
    #[arg(long, env = "MCAST_HO_SEED")]
    seed: Option<u64>,
    /// Trials per sweep point; overrides the configuration file.
    #[arg(long)]
    trials: Option<usize>,
    /// Output path, `-` for standard output.
    #[arg(long, short)]
    out: Option<String>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (kind, args) = match cli.command {
        Command::Analytic(a) => (ExperimentKind::Analytic, a),
        Command::Handover(a) => (ExperimentKind::Handover, a),
        Command::Mobility(a) => (ExperimentKind::Mobility, a),
    };
    let mut cfg = match &args.config {
        Some(path) => load_config(path).with_context(|| format!("loading {path}"))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        anyhow::ensure!(trials >= 1, "--trials must be >= 1");
        cfg.trials = trials;
    }
    let out = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| "-".into());
    run_experiment(&cfg, kind, &out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcast-ho: {e:#}");
            ExitCode::FAILURE
        }
    }
}
