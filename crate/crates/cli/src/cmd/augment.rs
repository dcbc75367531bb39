//! `daforge augment`: train an undercomplete autoencoder on a target
//! dataset and write a rebalanced copy where minority classes are grown
//! with latent-noise synthetics.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use daforge_core::augment::{build_autoencoder, train_autoencoder, AeConfig, AugmentPlan};
use daforge_core::data::save_wmd;
use daforge_core::rng::{fold_seed, stream_rng, Stream};

use crate::config::{AeFlags, AeSettings, ConfigMap};

#[derive(Debug, clap::Args)]
pub struct AugmentArgs {
    /// Target dataset to balance.
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the balanced dataset.
    #[arg(long)]
    pub output: PathBuf,
    /// Add exactly this many synthetics to every class (minus skipped
    /// ones) instead of topping classes up to a common count.
    #[arg(long, conflicts_with = "target_total")]
    pub add_per_class: Option<usize>,
    /// Class names exempt from --add-per-class growth. Repeatable.
    #[arg(long)]
    pub skip_class: Vec<String>,
    /// Grow every class to this count, or to the majority count with
    /// "max" (the default plan).
    #[arg(long)]
    pub target_total: Option<String>,
    #[command(flatten)]
    pub ae: AeFlags,
}

pub fn run(args: &AugmentArgs, config: &ConfigMap, seed: Option<u64>) -> Result<()> {
    let seed = config.seed(seed, 0)?;
    let settings = config.ae(
        &args.ae,
        AeSettings {
            epochs: 40,
            batch_size: 16,
            learning_rate: 1e-3,
            noise_std: 0.5,
        },
    )?;
    let dataset = super::load_dataset(&args.input)?;
    let before = dataset.class_counts();

    let plan = if let Some(add) = args.add_per_class {
        let mut skip = Vec::new();
        for name in &args.skip_class {
            match dataset.class_names.iter().position(|n| n == name) {
                Some(idx) => skip.push(idx),
                None => bail!(
                    "--skip-class {name:?} does not name a class (have: {})",
                    dataset.class_names.join(", ")
                ),
            }
        }
        AugmentPlan::add_per_class(&dataset, add, &skip, settings.noise_std, seed)
    } else {
        match args.target_total.as_deref() {
            None | Some("max") => AugmentPlan::to_max(&dataset, settings.noise_std, seed),
            Some(raw) => {
                let total: usize = raw
                    .parse()
                    .with_context(|| format!("--target-total {raw:?} is neither max nor a count"))?;
                AugmentPlan::to_total(&dataset, total, settings.noise_std, seed)
            }
        }
    };

    // Refuse infeasible plans before the autoencoder burns time: a class
    // that should grow but has no originals can never be synthesized.
    for (class, (&have, &want)) in before.iter().zip(&plan.target_counts).enumerate() {
        if have == 0 && want > 0 {
            return Err(daforge_core::augment::AugmentError::EmptyClass {
                class: dataset.class_names[class].clone(),
            }
            .into());
        }
    }

    let ae_seed = fold_seed(seed, 0xAE);
    let mut ae = build_autoencoder(
        [dataset.height, dataset.width, 3],
        &AeConfig::default(),
        &mut stream_rng(ae_seed, Stream::Init),
    )?;
    let history = train_autoencoder(
        &mut ae,
        &dataset,
        settings.epochs,
        settings.batch_size,
        settings.learning_rate,
        ae_seed,
    )?;
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "autoencoder: {} epochs, reconstruction loss {first:.6} -> {last:.6}",
            history.len()
        );
    }

    let balanced = daforge_core::augment::balance_dataset(&dataset, &plan, &ae)?;
    if let Some(parent) = args.output.parent() {
        if !parent.as_os_str().is_empty() {
            super::ensure_dir(parent)?;
        }
    }
    save_wmd(&balanced, &args.output)?;

    let after = balanced.class_counts();
    for ((name, b), a) in dataset.class_names.iter().zip(&before).zip(&after) {
        println!("{name}: {b} -> {a} (+{} synthetic)", a - b);
    }
    println!(
        "wrote {} ({} samples)",
        args.output.display(),
        balanced.len()
    );
    Ok(())
}
