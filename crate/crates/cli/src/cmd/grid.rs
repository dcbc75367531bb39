//! `daforge grid`: the full experiment table. Every (method row, target
//! budget, repeat) leg runs independently — in parallel when the machine
//! allows — and lands in one CSV with aggregate rows per cell. A failed
//! leg is recorded in its row and the remaining legs continue.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use daforge_core::data::Dataset;
use daforge_core::experiment::{
    leg_specs, render_grid_csv, run_leg, GridSpec, LegRecord,
};
use rayon::prelude::*;

use crate::config::{load_synth_spec, AeFlags, ConfigMap, HyperFlags, VanillaFlags};

#[derive(Debug, clap::Args)]
pub struct GridArgs {
    /// Source-domain WMD file.
    #[arg(long, requires = "target")]
    pub source: Option<PathBuf>,
    /// Target-domain WMD file.
    #[arg(long, requires = "source")]
    pub target: Option<PathBuf>,
    /// Generate the benchmark from this spec file instead of loading WMD
    /// files. With neither --source/--target nor --synth-spec, the
    /// built-in desk-scale benchmark is generated.
    #[arg(long, conflicts_with_all = ["source", "target"])]
    pub synth_spec: Option<PathBuf>,
    /// Results CSV path (default: <out-dir>/results.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Target training budgets, comma-separated, strictly ascending.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Repeats per cell; each repeat reuses its seed across all rows.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Table rows, comma-separated: da, da+aug, vanilla, vanilla+aug.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Fraction of each domain used for training (rest is held out).
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub hyper: HyperFlags,
    #[command(flatten)]
    pub vanilla: VanillaFlags,
    #[command(flatten)]
    pub ae: AeFlags,
}

fn load_or_generate(args: &GridArgs) -> Result<(Dataset, Dataset)> {
    match (&args.source, &args.target) {
        (Some(source), Some(target)) => Ok((
            super::load_dataset(source)?,
            super::load_dataset(target)?,
        )),
        _ => {
            let spec = load_synth_spec(args.synth_spec.as_deref(), None)?;
            Ok(daforge_core::data::generate_synth(&spec)?)
        }
    }
}

/// Worker cap from DAFORGE_THREADS; unset or empty means the rayon
/// default.
fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("DAFORGE_THREADS") {
        Ok(raw) if !raw.trim().is_empty() => {
            let n: usize = raw
                .trim()
                .parse()
                .with_context(|| format!("DAFORGE_THREADS={raw:?} is not a thread count"))?;
            if n == 0 {
                bail!("DAFORGE_THREADS must be at least 1");
            }
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

pub fn run(
    args: &GridArgs,
    config: &ConfigMap,
    seed: Option<u64>,
    deterministic: bool,
    out_dir: &std::path::Path,
) -> Result<()> {
    let master_seed = config.seed(seed, 0)?;
    let run_cfg = config.run_config(
        &args.hyper,
        &args.vanilla,
        &args.ae,
        args.train_fraction,
        deterministic,
    )?;
    let grid = GridSpec {
        rows: config.methods(args.methods.clone())?,
        sizes: config.sizes(args.sizes.clone(), &[25, 50, 75, 100])?,
        repeats: config.repeats(args.repeats, 5)?,
        master_seed,
    };
    let (source, target) = load_or_generate(args)?;
    let specs = leg_specs(&grid);
    println!(
        "running {} legs ({} rows x {} sizes x {} repeats)",
        specs.len(),
        grid.rows.len(),
        grid.sizes.len(),
        grid.repeats
    );

    let run_all = || -> Vec<LegRecord> {
        specs
            .par_iter()
            .map(|spec| LegRecord::from_result(*spec, run_leg(&source, &target, spec, &run_cfg)))
            .collect()
    };
    let records = match thread_cap()? {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("building worker pool")?
            .install(run_all),
        None => run_all(),
    };

    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| out_dir.join("results.csv"));
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            super::ensure_dir(parent)?;
        }
    }
    super::write_file(&out_path, &render_grid_csv(&records))?;

    let failures: Vec<&LegRecord> = records
        .iter()
        .filter(|r| matches!(r, LegRecord::Failed { .. }))
        .collect();
    for record in &failures {
        if let LegRecord::Failed { spec, message } = record {
            eprintln!(
                "leg {}{} n={} seed={} failed: {message}",
                spec.method.as_str(),
                if spec.augmented { "+aug" } else { "" },
                spec.n,
                spec.seed
            );
        }
    }
    println!(
        "wrote {} ({} legs, {} failed)",
        out_path.display(),
        records.len(),
        failures.len()
    );
    if !failures.is_empty() {
        bail!(
            "{} of {} legs failed; rows recorded in {}",
            failures.len(),
            records.len(),
            out_path.display()
        );
    }
    Ok(())
}
