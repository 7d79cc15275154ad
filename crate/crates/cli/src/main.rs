use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sympflow::eval::commands::{self, Paths};
use sympflow::eval::config::RunConfig;

/// Train and evaluate symplectic neural flows of Hamiltonian systems.
#[derive(Parser)]
#[command(name = "sympflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a trajectory dataset from the reference integrator.
    GenerateData(Common),
    /// Train a model and save its checkpoint.
    Train(Common),
    /// Roll a saved model out to the horizon and write its path and energy.
    Rollout(Common),
    /// Averaged error and energy metrics of a saved model.
    Evaluate(Common),
    /// Hénon–Heiles Poincaré sections of the reference and, optionally, a model.
    Poincare(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Model file to read (or, for `train`, to write). Defaults to
    /// `<out>/model.json`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn run(cli: Cli) -> sympflow::Result<()> {
    let common = match &cli.command {
        Command::GenerateData(c) | Command::Train(c) | Command::Rollout(c) | Command::Evaluate(c) | Command::Poincare(c) => c,
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let paths = Paths {
        out: common.out.clone(),
        checkpoint: common.checkpoint.clone(),
    };
    match cli.command {
        Command::GenerateData(_) => commands::generate_data(&cfg, &paths),
        Command::Train(_) => train(&cfg, &paths),
        Command::Rollout(_) => commands::rollout(&cfg, &paths),
        Command::Evaluate(_) => commands::evaluate(&cfg, &paths),
        Command::Poincare(_) => commands::poincare(&cfg, &paths),
    }
}

fn train(cfg: &RunConfig, paths: &Paths) -> sympflow::Result<()> {
    let report = commands::train_model(cfg, paths)?;
    if let Some(loss) = report.final_loss() {
        eprintln!("trained {} parameters, final loss {loss:.6e}", report.param_count);
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
