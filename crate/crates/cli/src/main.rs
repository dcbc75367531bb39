//! daforge: dataset tooling, training and evaluation for heterogeneous
//! domain adaptation on wafer-map defect data.
//!
//! Subcommands: `synth` (generate a synthetic benchmark), `augment`
//! (autoencoder rebalancing), `train` (adversarial or vanilla), `eval`
//! (score a checkpoint), `grid` (the whole experiment table) and
//! `check-grad` (finite-difference gradient audit).
//!
//! Exit codes are distinct per failure family: 2 synth failure, 3 nothing
//! to synthesize from (a class with zero samples), 4 numeric divergence
//! during training, 5 checkpoint/dataset shape mismatch, 1 anything else.
//!
//! `DAFORGE_THREADS` caps grid parallelism. `--deterministic` zeroes
//! wall-clock columns so identical reruns are byte-identical.

mod cmd;
mod config;

use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};
use daforge_core::adversarial::TrainError;
use daforge_core::augment::AugmentError;
use daforge_core::baseline::BaselineError;

#[derive(Parser)]
#[command(
    name = "daforge",
    version,
    about = "Wafer-map domain adaptation: data tooling, training, evaluation and experiment grids"
)]
struct Cli {
    /// Master RNG seed (wins over the config file's seed key).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Zero out wall-clock columns so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Flat key=value settings file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic source/target dataset pair as WMD files.
    Synth(cmd::synth::SynthArgs),
    /// Balance a dataset by synthesizing minority-class samples.
    Augment(cmd::augment::AugmentArgs),
    /// Train one model; writes model.ckpt and training.csv.
    Train(cmd::train::TrainArgs),
    /// Score a checkpoint on a labeled dataset.
    Eval(cmd::eval::EvalArgs),
    /// Run the method x budget x repeat grid into one results CSV.
    Grid(cmd::grid::GridArgs),
    /// Verify analytic gradients against finite differences.
    CheckGrad(cmd::check_grad::CheckGradArgs),
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let config = config::load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(args) => cmd::synth::run(args, cli.seed, &cli.out_dir),
        Command::Augment(args) => cmd::augment::run(args, &config, cli.seed),
        Command::Train(args) => cmd::train::run(args, &config, cli.seed, &cli.out_dir),
        Command::Eval(args) => cmd::eval::run(args, &config, cli.deterministic),
        Command::Grid(args) => {
            cmd::grid::run(args, &config, cli.seed, cli.deterministic, &cli.out_dir)
        }
        Command::CheckGrad(args) => cmd::check_grad::run(args, cli.seed),
    }
}

fn exit_code(command: &Command, err: &anyhow::Error) -> i32 {
    let chain_has = |pred: &dyn Fn(&(dyn std::error::Error + 'static)) -> bool| {
        err.chain().any(pred)
    };
    match command {
        Command::Synth(_) => 2,
        Command::Augment(_) => {
            if chain_has(&|e| {
                matches!(
                    e.downcast_ref::<AugmentError>(),
                    Some(AugmentError::EmptyClass { .. })
                )
            }) {
                3
            } else {
                1
            }
        }
        Command::Train(_) => {
            if chain_has(&|e| {
                matches!(
                    e.downcast_ref::<TrainError>(),
                    Some(TrainError::Diverged { .. })
                ) || matches!(
                    e.downcast_ref::<BaselineError>(),
                    Some(BaselineError::Diverged { .. })
                )
            }) {
                4
            } else {
                1
            }
        }
        Command::Eval(_) => {
            if chain_has(&|e| {
                matches!(
                    e.downcast_ref::<cmd::Fatal>(),
                    Some(cmd::Fatal::ShapeMismatch(_))
                )
            }) {
                5
            } else {
                1
            }
        }
        Command::Grid(_) | Command::CheckGrad(_) => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(&cli) {
        eprintln!("error: {err:#}");
        process::exit(exit_code(&cli.command, &err));
    }
}
