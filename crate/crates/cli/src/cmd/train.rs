//! `daforge train`: train the adversarial model or the vanilla baseline on
//! full datasets, writing a checkpoint and the loss curve.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use daforge_core::adversarial::{self, build_desk_networks, build_paper_networks, HyperParams};
use daforge_core::baseline::{build_vanilla, train_baseline};
use daforge_core::checkpoint::{save_checkpoint, Checkpoint};
use daforge_core::experiment::{Architecture, Method};
use daforge_core::rng::{stream_rng, Stream};

use crate::config::{ConfigMap, HyperFlags, VanillaFlags, VanillaSettings};

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// da or vanilla.
    #[arg(long)]
    pub method: String,
    /// Source-domain WMD file (required for da, unused for vanilla).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Target-domain WMD file; both methods train on it.
    #[arg(long)]
    pub target: PathBuf,
    #[command(flatten)]
    pub hyper: HyperFlags,
    #[command(flatten)]
    pub vanilla: VanillaFlags,
}

pub fn run(args: &TrainArgs, config: &ConfigMap, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let Some(method) = Method::parse(&args.method) else {
        bail!("unknown method {:?} (expected da or vanilla)", args.method);
    };
    let seed = config.seed(seed, 0)?;
    super::ensure_dir(out_dir)?;
    let checkpoint_path = out_dir.join("model.ckpt");
    let curve_path = out_dir.join("training.csv");
    let target = super::load_dataset(&args.target)?;

    match method {
        Method::Da => {
            let Some(source_path) = &args.source else {
                bail!("--source is required for method da");
            };
            let source = super::load_dataset(source_path)?;
            if source.num_classes() != target.num_classes() {
                bail!(
                    "source has {} classes but target has {}",
                    source.num_classes(),
                    target.num_classes()
                );
            }
            let hyper = config.hyper(&args.hyper, HyperParams::default())?;
            let architecture = config.architecture(args.hyper.architecture.as_deref())?;
            let source_shape = [source.height, source.width, 3];
            let target_shape = [target.height, target.width, 3];
            let mut init = stream_rng(seed, Stream::Init);
            let mut model = match architecture {
                Architecture::Desk => build_desk_networks(
                    source_shape,
                    target_shape,
                    target.num_classes(),
                    &mut init,
                )?,
                Architecture::Paper => build_paper_networks(
                    source_shape,
                    target_shape,
                    target.num_classes(),
                    &mut init,
                )?,
            };
            println!(
                "training adversarial model: {} iterations, batch {}, {} source / {} target samples",
                hyper.iterations,
                hyper.batch_size,
                source.len(),
                target.len()
            );
            let losses = adversarial::train(&mut model, &source, &target, &hyper, seed)
                .context("adversarial training")?;

            let mut curve = String::from("iteration,classification,discriminator,generator\n");
            for (i, step) in losses.iter().enumerate() {
                writeln!(
                    curve,
                    "{},{:.6},{:.6},{:.6}",
                    i + 1,
                    step.classification,
                    step.discriminator,
                    step.generator
                )
                .expect("string write");
            }
            super::write_file(&curve_path, &curve)?;
            if let Some(last) = losses.last() {
                println!(
                    "final losses: classification {:.4}, discriminator {:.4}, generator {:.4}",
                    last.classification, last.discriminator, last.generator
                );
            }
            save_checkpoint(
                &Checkpoint::DomainAdaptation { model, hyper, seed },
                &checkpoint_path,
            )?;
        }
        Method::Vanilla => {
            let settings = config.vanilla(
                &args.vanilla,
                VanillaSettings {
                    epochs: 60,
                    batch_size: 32,
                    learning_rate: 1e-3,
                },
            )?;
            let mut init = stream_rng(seed, Stream::Init);
            let mut model = build_vanilla(
                [target.height, target.width, 3],
                target.num_classes(),
                &mut init,
            )?;
            println!(
                "training vanilla baseline: {} epochs, batch {}, {} samples",
                settings.epochs,
                settings.batch_size,
                target.len()
            );
            let training = train_baseline(
                &mut model,
                &target,
                settings.epochs,
                settings.batch_size,
                settings.learning_rate,
                seed,
            )
            .context("baseline training")?;

            let mut curve = String::from("epoch,loss\n");
            for (i, loss) in training.history.iter().enumerate() {
                writeln!(curve, "{},{:.6}", i + 1, loss).expect("string write");
            }
            super::write_file(&curve_path, &curve)?;
            if let Some(best) = training.best_epoch {
                println!(
                    "best epoch {} of {} (loss {:.6}); checkpoint holds the best weights",
                    best + 1,
                    training.history.len(),
                    training.history[best]
                );
            }
            save_checkpoint(
                &Checkpoint::Vanilla {
                    model,
                    learning_rate: settings.learning_rate,
                    epochs: settings.epochs,
                    batch_size: settings.batch_size,
                    seed,
                },
                &checkpoint_path,
            )?;
        }
    }
    println!(
        "wrote {} and {}",
        checkpoint_path.display(),
        curve_path.display()
    );
    Ok(())
}
