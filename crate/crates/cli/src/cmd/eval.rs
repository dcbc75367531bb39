//! `daforge eval`: score a checkpoint on a labeled WMD dataset and print
//! the result as one CSV row (headline metrics, timing, per-class recalls).

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use daforge_core::adversarial;
use daforge_core::checkpoint::{load_checkpoint, Checkpoint};
use daforge_core::data::{argmax, Domain};
use daforge_core::metrics::{timed, ConfusionMatrix, MetricsReport};

use crate::config::ConfigMap;

use super::Fatal;

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Model container written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled dataset to score.
    #[arg(long)]
    pub data: PathBuf,
    /// Input route for adversarial checkpoints: source or target.
    #[arg(long, default_value = "target")]
    pub domain: String,
    /// Also append the row to this CSV, writing the header first if the
    /// file does not exist yet.
    #[arg(long)]
    pub append: Option<PathBuf>,
}

pub fn run(args: &EvalArgs, config: &ConfigMap, deterministic: bool) -> Result<()> {
    let deterministic = config.deterministic(deterministic)?;
    let checkpoint = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let dataset = super::load_dataset(&args.data)?;
    let domain = match args.domain.as_str() {
        "source" => Domain::Source,
        "target" => Domain::Target,
        other => bail!("unknown domain {other:?} (expected source or target)"),
    };

    let data_shape = [dataset.height, dataset.width, 3];
    let (expected_shape, class_count, domain_label) = match &checkpoint {
        Checkpoint::DomainAdaptation { model, .. } => {
            let expected = match domain {
                Domain::Source => model.source_shape,
                Domain::Target => model.target_shape,
            };
            (expected, model.class_count, args.domain.as_str())
        }
        Checkpoint::Vanilla { model, .. } => (model.input_shape, model.class_count, "-"),
    };
    if data_shape != expected_shape {
        return Err(Fatal::ShapeMismatch(format!(
            "dataset {} is {}x{}x3 but the checkpoint expects {}x{}x{}",
            args.data.display(),
            dataset.height,
            dataset.width,
            expected_shape[0],
            expected_shape[1],
            expected_shape[2],
        ))
        .into());
    }
    if dataset.num_classes() != class_count {
        return Err(Fatal::ShapeMismatch(format!(
            "dataset {} has {} classes but the checkpoint expects {}",
            args.data.display(),
            dataset.num_classes(),
            class_count,
        ))
        .into());
    }

    let (cm, seconds) = timed(|| -> Result<ConfusionMatrix> {
        let mut cm = ConfusionMatrix::new(dataset.num_classes());
        for sample in &dataset.samples {
            let probs = match &checkpoint {
                Checkpoint::DomainAdaptation { model, .. } => {
                    adversarial::predict(model, &sample.image, domain)?
                }
                Checkpoint::Vanilla { model, .. } => model.predict(&sample.image)?,
            };
            cm.record(sample.label, argmax(probs.data()));
        }
        Ok(cm)
    });
    let cm = cm?;
    let mut report = MetricsReport::from_matrix(&cm)?;
    report.test_seconds = if deterministic { 0.0 } else { seconds };

    let mut header = String::from("checkpoint,data,domain,samples,balanced_accuracy,precision,test_seconds");
    for name in &dataset.class_names {
        write!(header, ",recall_{name}").expect("string write");
    }
    let mut row = format!(
        "{},{},{},{},{:.6},{:.6},{:.2}",
        args.checkpoint.display(),
        args.data.display(),
        domain_label,
        report.samples,
        report.balanced_accuracy,
        report.precision,
        report.test_seconds,
    );
    for recall in &report.per_class_recall {
        match recall {
            Some(r) => write!(row, ",{r:.6}").expect("string write"),
            None => row.push_str(",n/a"),
        }
    }
    println!("{header}");
    println!("{row}");

    if let Some(path) = &args.append {
        let fresh = !path.exists();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        if fresh {
            writeln!(file, "{header}")?;
        }
        writeln!(file, "{row}")?;
    }
    Ok(())
}
