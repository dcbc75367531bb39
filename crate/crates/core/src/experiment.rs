//! End-to-end experiment legs and result tables.
//!
//! A *leg* is one complete run of one method on one data budget: split the
//! domains, draw `n` labeled target training samples, optionally balance
//! them with autoencoder augmentation, train the chosen classifier, and
//! score it on the untouched target test split. A *grid* is the cross
//! product (method x augmented x n x repeat) whose results land in one CSV,
//! with per-cell aggregate rows appended.
//!
//! Everything here is deterministic given the seeds: each repeat folds its
//! index into the master seed, and every random consumer inside a leg draws
//! from its own sub-stream of the leg seed. In deterministic mode the
//! wall-clock columns are forced to zero so a rerun is byte-identical.
//!
//! CSV schema (one header row, then one row per leg):
//!
//! ```text
//! method,augmented,n,seed,balanced_accuracy,precision,train_seconds,test_seconds
//! ```
//!
//! Metrics carry six decimals, seconds two. After the runs of each
//! (method, augmented, n) cell with at least two repeats comes an aggregate
//! row with `agg` in the seed column and `mean±half-width` entries (95%
//! Student-t interval). A failed leg keeps its row: `failed` in the
//! balanced-accuracy column and the reason (commas stripped) in the
//! precision column; cells with fewer than two successful runs aggregate to
//! `n/a`.

use thiserror::Error;

use crate::adversarial::{
    self, build_desk_networks, build_paper_networks, DaModel, HyperParams, TrainError,
};
use crate::augment::{
    balance_dataset, build_autoencoder, train_autoencoder, AeConfig, AugmentError, AugmentPlan,
};
use crate::baseline::{build_vanilla, train_baseline, BaselineError, BaselineModel};
use crate::data::{argmax, subsample, stratified_split, DataError, Dataset, Domain};
use crate::metrics::{
    aggregate_runs, timed, ConfusionMatrix, MetricsError, MetricsReport,
};
use crate::rng::{derive_seed, fold_seed, stream_rng, Stream};
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{domain:?} dataset given for the {expected:?} role")]
    WrongDomain { expected: Domain, domain: Domain },
    #[error("source has {source_classes} classes but target has {target_classes}")]
    ClassMismatch {
        source_classes: usize,
        target_classes: usize,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Which classifier a leg trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Adversarial domain adaptation: five networks, source + target data.
    Da,
    /// Plain convolutional classifier trained on target data only.
    Vanilla,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Da => "da",
            Method::Vanilla => "vanilla",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "da" => Some(Method::Da),
            "vanilla" => Some(Method::Vanilla),
            _ => None,
        }
    }
}

/// Network sizing for the adversarial model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Architecture {
    /// Compact networks for fast desk-scale runs.
    #[default]
    Desk,
    /// The full-size production stack (52x52-class inputs, 2028-wide
    /// private features).
    Paper,
}

/// One cell-and-repeat of the grid: what to train, on how much data, with
/// which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegSpec {
    pub method: Method,
    pub augmented: bool,
    /// Labeled target training samples drawn after the split.
    pub n: usize,
    pub seed: u64,
}

/// Everything a leg needs besides the datasets and its own spec. The same
/// config is shared by all legs of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Adversarial training hyperparameters (iterations, batch, rates).
    pub hyper: HyperParams,
    pub architecture: Architecture,
    pub vanilla_epochs: usize,
    pub vanilla_batch_size: usize,
    pub vanilla_learning_rate: f64,
    /// Autoencoder geometry for the augmentation stage.
    pub ae: AeConfig,
    pub ae_epochs: usize,
    pub ae_batch_size: usize,
    pub ae_learning_rate: f64,
    /// Latent-noise scale for synthetic samples.
    pub noise_std: f64,
    /// Fraction of each domain kept for training; the rest is the held-out
    /// test side.
    pub train_fraction: f64,
    /// Replace measured wall-clock seconds with zero in every report.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hyper: HyperParams::desk(),
            architecture: Architecture::Desk,
            vanilla_epochs: 30,
            vanilla_batch_size: 16,
            vanilla_learning_rate: 1e-3,
            ae: AeConfig::default(),
            ae_epochs: 40,
            ae_batch_size: 16,
            ae_learning_rate: 1e-3,
            noise_std: 0.5,
            train_fraction: 0.6,
            deterministic: false,
        }
    }
}

/// Train/test division of both domains for one leg seed.
#[derive(Debug, Clone)]
pub struct Splits {
    pub source_train: Dataset,
    pub source_test: Dataset,
    pub target_train: Dataset,
    pub target_test: Dataset,
}

/// Salt folded into a leg seed to derive the source-side split stream.
const SOURCE_SALT: u64 = 1;
/// Salt folded into a leg seed for everything the autoencoder draws.
const AE_SALT: u64 = 0xAE;

/// Deterministic per-leg split of both domains. Exposed so that evaluation
/// code (for example the domain-confusion probe) can reconstruct exactly
/// the held-out data a leg never trained on.
pub fn split_domains(
    source: &Dataset,
    target: &Dataset,
    seed: u64,
    train_fraction: f64,
) -> Result<Splits, ExperimentError> {
    if source.domain != Domain::Source {
        return Err(ExperimentError::WrongDomain {
            expected: Domain::Source,
            domain: source.domain,
        });
    }
    if target.domain != Domain::Target {
        return Err(ExperimentError::WrongDomain {
            expected: Domain::Target,
            domain: target.domain,
        });
    }
    let (target_train, target_test) =
        stratified_split(target, train_fraction, derive_seed(seed, Stream::Split))?;
    let (source_train, source_test) = stratified_split(
        source,
        train_fraction,
        derive_seed(fold_seed(seed, SOURCE_SALT), Stream::Split),
    )?;
    Ok(Splits {
        source_train,
        source_test,
        target_train,
        target_test,
    })
}

/// The leg's data-budget stage: draw `n` random target training samples,
/// then (for augmented legs) train an autoencoder on just those samples and
/// grow every class to the majority count with latent-noise synthetics.
pub fn prepare_target_training(
    target_train: &Dataset,
    spec: &LegSpec,
    cfg: &RunConfig,
) -> Result<Dataset, ExperimentError> {
    let drawn = subsample(
        target_train,
        spec.n,
        derive_seed(spec.seed, Stream::Subsample),
    )?;
    if !spec.augmented {
        return Ok(drawn);
    }
    let ae_seed = fold_seed(spec.seed, AE_SALT);
    let mut ae = build_autoencoder(
        [drawn.height, drawn.width, 3],
        &cfg.ae,
        &mut stream_rng(ae_seed, Stream::Init),
    )?;
    train_autoencoder(
        &mut ae,
        &drawn,
        cfg.ae_epochs,
        cfg.ae_batch_size,
        cfg.ae_learning_rate,
        ae_seed,
    )?;
    let plan = AugmentPlan::to_max(&drawn, cfg.noise_std, ae_seed);
    Ok(balance_dataset(&drawn, &plan, &ae)?)
}

/// The trained artifact a leg hands back, ready for checkpointing or extra
/// probes.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Da(DaModel),
    Vanilla(BaselineModel),
}

/// A finished leg: its spec, the scored report, and the trained model.
#[derive(Debug, Clone)]
pub struct LegOutcome {
    pub spec: LegSpec,
    pub report: MetricsReport,
    pub model: TrainedModel,
}

fn evaluate_target(
    outcome_model: &TrainedModel,
    test: &Dataset,
) -> Result<ConfusionMatrix, ExperimentError> {
    let mut cm = ConfusionMatrix::new(test.num_classes());
    for sample in &test.samples {
        let probs = match outcome_model {
            TrainedModel::Da(model) => {
                adversarial::predict(model, &sample.image, Domain::Target)?
            }
            TrainedModel::Vanilla(model) => model.predict(&sample.image)?,
        };
        cm.record(sample.label, argmax(probs.data()));
    }
    Ok(cm)
}

/// Run one leg start to finish. The returned report's timing fields hold
/// the measured train/test seconds, or exact zeros in deterministic mode.
pub fn run_leg(
    source: &Dataset,
    target: &Dataset,
    spec: &LegSpec,
    cfg: &RunConfig,
) -> Result<LegOutcome, ExperimentError> {
    if source.num_classes() != target.num_classes() {
        return Err(ExperimentError::ClassMismatch {
            source_classes: source.num_classes(),
            target_classes: target.num_classes(),
        });
    }
    let splits = split_domains(source, target, spec.seed, cfg.train_fraction)?;
    let target_data = prepare_target_training(&splits.target_train, spec, cfg)?;
    let classes = target.num_classes();

    let (model, train_seconds) = match spec.method {
        Method::Da => {
            let mut init = stream_rng(spec.seed, Stream::Init);
            let source_shape = [source.height, source.width, 3];
            let target_shape = [target.height, target.width, 3];
            let mut model = match cfg.architecture {
                Architecture::Desk => {
                    build_desk_networks(source_shape, target_shape, classes, &mut init)?
                }
                Architecture::Paper => {
                    build_paper_networks(source_shape, target_shape, classes, &mut init)?
                }
            };
            let (outcome, seconds) = timed(|| {
                adversarial::train(
                    &mut model,
                    &splits.source_train,
                    &target_data,
                    &cfg.hyper,
                    spec.seed,
                )
            });
            outcome?;
            (TrainedModel::Da(model), seconds)
        }
        Method::Vanilla => {
            let mut init = stream_rng(spec.seed, Stream::Init);
            let mut model =
                build_vanilla([target.height, target.width, 3], classes, &mut init)?;
            let (outcome, seconds) = timed(|| {
                train_baseline(
                    &mut model,
                    &target_data,
                    cfg.vanilla_epochs,
                    cfg.vanilla_batch_size,
                    cfg.vanilla_learning_rate,
                    spec.seed,
                )
            });
            outcome?;
            (TrainedModel::Vanilla(model), seconds)
        }
    };

    let (cm, test_seconds) = timed(|| evaluate_target(&model, &splits.target_test));
    let mut report = MetricsReport::from_matrix(&cm?)?;
    report.train_seconds = if cfg.deterministic { 0.0 } else { train_seconds };
    report.test_seconds = if cfg.deterministic { 0.0 } else { test_seconds };
    Ok(LegOutcome {
        spec: *spec,
        report,
        model,
    })
}

/// Held-out domain-classification accuracy of the frozen discriminator,
/// averaged per domain so unequal held-out pool sizes cannot skew it: a
/// discriminator that always answers one domain scores exactly 0.5, the
/// same as a fair coin. Near 0.5 means the shared representation carries
/// no domain signal; near 1.0 means adaptation failed.
pub fn domain_confusion_accuracy(
    model: &DaModel,
    source_heldout: &Dataset,
    target_heldout: &Dataset,
) -> Result<f64, ExperimentError> {
    let mut per_domain = [0.0; 2];
    for (slot, (dataset, domain)) in [
        (source_heldout, Domain::Source),
        (target_heldout, Domain::Target),
    ]
    .into_iter()
    .enumerate()
    {
        let mut correct = 0usize;
        for sample in &dataset.samples {
            let probs = adversarial::domain_probabilities(model, &sample.image, domain)?;
            if argmax(probs.data()) == domain.as_u8() as usize {
                correct += 1;
            }
        }
        per_domain[slot] = correct as f64 / dataset.samples.len().max(1) as f64;
    }
    Ok((per_domain[0] + per_domain[1]) / 2.0)
}

/// The grid's extent: which (method, augmented) rows to run, at which data
/// budgets, repeated how often.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: Vec<(Method, bool)>,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub master_seed: u64,
}

/// All four method rows in their canonical table order.
pub fn all_method_rows() -> Vec<(Method, bool)> {
    vec![
        (Method::Da, true),
        (Method::Da, false),
        (Method::Vanilla, true),
        (Method::Vanilla, false),
    ]
}

/// Seed for one repeat of a grid. Repeats share it across methods and
/// sizes, so every row of the table sees identical splits and subsamples —
/// the comparison is paired.
pub fn repeat_seed(master: u64, repeat: usize) -> u64 {
    fold_seed(master, repeat as u64)
}

/// The grid unrolled into legs in canonical order: row-major over
/// (method row, size, repeat).
pub fn leg_specs(grid: &GridSpec) -> Vec<LegSpec> {
    let mut specs = Vec::with_capacity(grid.rows.len() * grid.sizes.len() * grid.repeats);
    for &(method, augmented) in &grid.rows {
        for &n in &grid.sizes {
            for repeat in 0..grid.repeats {
                specs.push(LegSpec {
                    method,
                    augmented,
                    n,
                    seed: repeat_seed(grid.master_seed, repeat),
                });
            }
        }
    }
    specs
}

/// One CSV row: a scored leg or a recorded failure.
#[derive(Debug, Clone)]
pub enum LegRecord {
    Ok {
        spec: LegSpec,
        report: MetricsReport,
    },
    Failed {
        spec: LegSpec,
        message: String,
    },
}

impl LegRecord {
    pub fn spec(&self) -> &LegSpec {
        match self {
            LegRecord::Ok { spec, .. } | LegRecord::Failed { spec, .. } => spec,
        }
    }

    pub fn from_result(spec: LegSpec, result: Result<LegOutcome, ExperimentError>) -> Self {
        match result {
            Ok(outcome) => LegRecord::Ok {
                spec,
                report: outcome.report,
            },
            Err(err) => LegRecord::Failed {
                spec,
                message: err.to_string(),
            },
        }
    }
}

/// Run every leg of the grid sequentially, recording failures instead of
/// aborting. Callers that parallelize run [`leg_specs`] themselves and
/// collect records in spec order.
pub fn run_grid(
    source: &Dataset,
    target: &Dataset,
    grid: &GridSpec,
    cfg: &RunConfig,
) -> Vec<LegRecord> {
    leg_specs(grid)
        .into_iter()
        .map(|spec| LegRecord::from_result(spec, run_leg(source, target, &spec, cfg)))
        .collect()
}

pub const GRID_CSV_HEADER: &str =
    "method,augmented,n,seed,balanced_accuracy,precision,train_seconds,test_seconds";

fn cell_key(spec: &LegSpec) -> (Method, bool, usize) {
    (spec.method, spec.augmented, spec.n)
}

fn run_row(record: &LegRecord) -> String {
    let spec = record.spec();
    let prefix = format!(
        "{},{},{},{}",
        spec.method.as_str(),
        spec.augmented,
        spec.n,
        spec.seed
    );
    match record {
        LegRecord::Ok { report, .. } => format!(
            "{prefix},{:.6},{:.6},{:.2},{:.2}",
            report.balanced_accuracy, report.precision, report.train_seconds, report.test_seconds
        ),
        LegRecord::Failed { message, .. } => {
            let clean: String = message
                .replace(['\n', '\r'], " ")
                .chars()
                .map(|c| if c == ',' { ';' } else { c })
                .collect();
            format!("{prefix},failed,{clean},0.00,0.00")
        }
    }
}

fn aggregate_row(key: (Method, bool, usize), records: &[&LegRecord]) -> String {
    let prefix = format!("{},{},{},agg", key.0.as_str(), key.1, key.2);
    let reports: Vec<MetricsReport> = records
        .iter()
        .filter_map(|r| match r {
            LegRecord::Ok { report, .. } => Some(report.clone()),
            LegRecord::Failed { .. } => None,
        })
        .collect();
    match aggregate_runs(&reports) {
        Ok(agg) => format!(
            "{prefix},{:.6}±{:.6},{:.6}±{:.6},{:.2}±{:.2},{:.2}±{:.2}",
            agg.balanced_accuracy.mean,
            agg.balanced_accuracy.half_width,
            agg.precision.mean,
            agg.precision.half_width,
            agg.train_seconds.mean,
            agg.train_seconds.half_width,
            agg.test_seconds.mean,
            agg.test_seconds.half_width,
        ),
        Err(_) => format!("{prefix},n/a,n/a,n/a,n/a"),
    }
}

/// Render records into the documented CSV. Rows keep their input order;
/// after the last run of each (method, augmented, n) cell with two or more
/// repeats, an aggregate row is inserted.
pub fn render_grid_csv(records: &[LegRecord]) -> String {
    let mut cells: Vec<((Method, bool, usize), Vec<&LegRecord>)> = Vec::new();
    for record in records {
        let key = cell_key(record.spec());
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, list)) => list.push(record),
            None => cells.push((key, vec![record])),
        }
    }
    let mut out = String::from(GRID_CSV_HEADER);
    out.push('\n');
    for (key, list) in &cells {
        for record in list {
            out.push_str(&run_row(record));
            out.push('\n');
        }
        if list.len() >= 2 {
            out.push_str(&aggregate_row(*key, list));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synth, SynthSpec};

    fn tiny_synth() -> (Dataset, Dataset) {
        let spec = SynthSpec {
            source_size: 10,
            target_size: 8,
            source_per_class: 30,
            target_counts: vec![40, 12, 12],
            noise_rate: 0.02,
            seed: 90,
        };
        generate_synth(&spec).unwrap()
    }

    fn fast_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.hyper.iterations = 40;
        cfg.hyper.batch_size = 8;
        cfg.vanilla_epochs = 4;
        cfg.ae_epochs = 4;
        cfg.deterministic = true;
        cfg
    }

    #[test]
    fn vanilla_leg_produces_a_valid_report() {
        let (source, target) = tiny_synth();
        let spec = LegSpec {
            method: Method::Vanilla,
            augmented: false,
            n: 24,
            seed: 7,
        };
        let outcome = run_leg(&source, &target, &spec, &fast_config()).unwrap();
        assert!(matches!(outcome.model, TrainedModel::Vanilla(_)));
        let r = &outcome.report;
        assert!(r.balanced_accuracy >= 0.0 && r.balanced_accuracy <= 1.0);
        assert!(r.precision >= 0.0 && r.precision <= 1.0);
        assert_eq!(r.train_seconds, 0.0, "deterministic mode zeroes timings");
        assert_eq!(r.test_seconds, 0.0);
        // The test side holds the rest of the target data: 40% of each class.
        assert_eq!(r.samples, 16 + 5 + 5);
    }

    #[test]
    fn da_leg_runs_and_reports() {
        let (source, target) = tiny_synth();
        let spec = LegSpec {
            method: Method::Da,
            augmented: false,
            n: 24,
            seed: 3,
        };
        let outcome = run_leg(&source, &target, &spec, &fast_config()).unwrap();
        let TrainedModel::Da(model) = &outcome.model else {
            panic!("expected a DA model");
        };
        let splits = split_domains(&source, &target, spec.seed, 0.6).unwrap();
        let acc =
            domain_confusion_accuracy(model, &splits.source_test, &splits.target_test).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn legs_are_deterministic_per_seed() {
        let (source, target) = tiny_synth();
        let cfg = fast_config();
        let spec = LegSpec {
            method: Method::Vanilla,
            augmented: true,
            n: 30,
            seed: 11,
        };
        let bits = |outcome: &LegOutcome| -> Vec<u64> {
            let TrainedModel::Vanilla(m) = &outcome.model else {
                panic!("expected a vanilla model");
            };
            m.net
                .layers
                .iter()
                .flat_map(|l| l.params())
                .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
                .collect()
        };
        let a = run_leg(&source, &target, &spec, &cfg).unwrap();
        let b = run_leg(&source, &target, &spec, &cfg).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(bits(&a), bits(&b), "same seed must retrace training");
        let other = run_leg(
            &source,
            &target,
            &LegSpec { seed: 12, ..spec },
            &cfg,
        )
        .unwrap();
        assert_ne!(
            bits(&a),
            bits(&other),
            "different seeds should train different parameters"
        );
    }

    #[test]
    fn augmented_preparation_balances_the_subsample() {
        let (_, target) = tiny_synth();
        let cfg = fast_config();
        let splits_seed = 5;
        let (target_train, _) =
            stratified_split(&target, 0.6, derive_seed(splits_seed, Stream::Split)).unwrap();
        let spec = LegSpec {
            method: Method::Vanilla,
            augmented: true,
            n: 30,
            seed: splits_seed,
        };
        let prepared = prepare_target_training(&target_train, &spec, &cfg).unwrap();
        let counts = prepared.class_counts();
        let max = *counts.iter().max().unwrap();
        assert!(counts.iter().all(|&c| c == max), "balanced: {counts:?}");
        assert!(prepared.len() >= 30);

        let plain = prepare_target_training(
            &target_train,
            &LegSpec {
                augmented: false,
                ..spec
            },
            &cfg,
        )
        .unwrap();
        assert_eq!(plain.len(), 30);
    }

    #[test]
    fn subsample_cannot_exceed_available_data() {
        let (source, target) = tiny_synth();
        let spec = LegSpec {
            method: Method::Vanilla,
            augmented: false,
            n: 10_000,
            seed: 1,
        };
        let err = run_leg(&source, &target, &spec, &fast_config()).unwrap_err();
        assert!(err.to_string().contains("requested 10000"), "got: {err}");
    }

    #[test]
    fn grid_records_failures_and_continues() {
        let (source, target) = tiny_synth();
        let grid = GridSpec {
            rows: vec![(Method::Vanilla, false)],
            sizes: vec![20, 10_000],
            repeats: 2,
            master_seed: 42,
        };
        let records = run_grid(&source, &target, &grid, &fast_config());
        assert_eq!(records.len(), 4);
        assert!(matches!(records[0], LegRecord::Ok { .. }));
        assert!(matches!(records[1], LegRecord::Ok { .. }));
        assert!(matches!(records[2], LegRecord::Failed { .. }));
        assert!(matches!(records[3], LegRecord::Failed { .. }));
        let csv = render_grid_csv(&records);
        assert!(csv.contains("failed"));
        // The failing cell still gets an aggregate row, marked n/a.
        assert!(csv.contains("vanilla,false,10000,agg,n/a,n/a,n/a,n/a"));
        // The succeeding cell aggregates normally.
        assert!(csv.contains("vanilla,false,20,agg,"));
    }

    #[test]
    fn leg_specs_unroll_in_canonical_order() {
        let grid = GridSpec {
            rows: vec![(Method::Da, true), (Method::Vanilla, false)],
            sizes: vec![25, 50],
            repeats: 2,
            master_seed: 9,
        };
        let specs = leg_specs(&grid);
        assert_eq!(specs.len(), 8);
        assert_eq!(specs[0].method, Method::Da);
        assert_eq!(specs[0].n, 25);
        assert_eq!(specs[1].n, 25);
        assert_ne!(specs[0].seed, specs[1].seed, "repeats use distinct seeds");
        assert_eq!(
            specs[0].seed, specs[4].seed,
            "the same repeat shares its seed across rows"
        );
        assert_eq!(specs[2].n, 50);
        assert_eq!(specs[4].method, Method::Vanilla);
    }

    #[test]
    fn csv_rendering_matches_golden_rows() {
        let report = |ba: f64, p: f64| MetricsReport {
            balanced_accuracy: ba,
            precision: p,
            per_class_recall: vec![],
            samples: 10,
            train_seconds: 1.5,
            test_seconds: 0.25,
        };
        let spec = |seed| LegSpec {
            method: Method::Da,
            augmented: true,
            n: 100,
            seed,
        };
        let records = vec![
            LegRecord::Ok {
                spec: spec(1),
                report: report(0.7, 0.6),
            },
            LegRecord::Ok {
                spec: spec(2),
                report: report(0.8, 0.7),
            },
        ];
        let csv = render_grid_csv(&records);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], GRID_CSV_HEADER);
        assert_eq!(lines[1], "da,true,100,1,0.700000,0.600000,1.50,0.25");
        assert_eq!(lines[2], "da,true,100,2,0.800000,0.700000,1.50,0.25");
        // Two runs at {0.7, 0.8}: mean 0.75, and the 95% t half-width is
        // 12.7062... * 0.05 = 0.635310 (one degree of freedom).
        assert_eq!(
            lines[3],
            "da,true,100,agg,0.750000±0.635310,0.650000±0.635310,1.50±0.00,0.25±0.00"
        );
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn failed_row_sanitizes_message() {
        let records = vec![LegRecord::Failed {
            spec: LegSpec {
                method: Method::Vanilla,
                augmented: false,
                n: 50,
                seed: 3,
            },
            message: "boom, with commas\nand newlines".into(),
        }];
        let csv = render_grid_csv(&records);
        assert!(
            csv.contains("vanilla,false,50,3,failed,boom; with commas and newlines,0.00,0.00"),
            "got: {csv}"
        );
    }

    #[test]
    fn rejects_swapped_domains() {
        let (source, target) = tiny_synth();
        let err = split_domains(&target, &source, 1, 0.6).unwrap_err();
        assert!(matches!(err, ExperimentError::WrongDomain { .. }));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Da, Method::Vanilla] {
            assert_eq!(Method::parse(m.as_str()), Some(m));
        }
        assert_eq!(Method::parse("svm"), None);
    }
}
