//! `daforge synth`: generate a paired synthetic source/target benchmark and
//! write it as WMD files (plus their sibling class-name files).

use std::path::{Path, PathBuf};

use anyhow::Result;
use daforge_core::data::{save_wmd, Dataset};

use crate::config::load_synth_spec;

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Flat key=value file describing the synthetic datasets
    /// (source_size, target_size, source_per_class, target_counts,
    /// noise_rate, seed). Missing keys fall back to the built-in
    /// desk-scale benchmark.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

fn describe(dataset: &Dataset, label: &str, path: &Path) {
    let counts = dataset.class_counts();
    let per_class: Vec<String> = dataset
        .class_names
        .iter()
        .zip(&counts)
        .map(|(name, count)| format!("{name}={count}"))
        .collect();
    println!(
        "{label}: {} samples, {}x{} -> {} ({})",
        dataset.len(),
        dataset.height,
        dataset.width,
        path.display(),
        per_class.join(", ")
    );
}

pub fn run(args: &SynthArgs, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let spec = load_synth_spec(args.spec.as_deref(), seed)?;
    let (source, target) = daforge_core::data::generate_synth(&spec)?;
    super::ensure_dir(out_dir)?;
    let source_path = out_dir.join("source.wmd");
    let target_path = out_dir.join("target.wmd");
    save_wmd(&source, &source_path)?;
    save_wmd(&target, &target_path)?;
    describe(&source, "source", &source_path);
    describe(&target, "target", &target_path);
    Ok(())
}
