//! Confusion-matrix accounting, imbalance-aware headline metrics, per-seed
//! aggregation with Student-t confidence intervals, and wall-clock timing.

use statrs::distribution::{ContinuousCDF, StudentsT};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("confusion matrix has no observations")]
    EmptyMatrix,
    #[error("aggregation needs at least 2 runs, got {got}")]
    TooFewRuns { got: usize },
}

/// C x C counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        assert!(true_class < self.classes && predicted < self.classes);
        self.counts[true_class * self.classes + predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.count(c, c)).sum()
    }

    fn row_sum(&self, row: usize) -> u64 {
        (0..self.classes).map(|c| self.count(row, c)).sum()
    }

    fn col_sum(&self, col: usize) -> u64 {
        (0..self.classes).map(|r| self.count(r, col)).sum()
    }
}

/// Recall of one class, or `None` when the class has no true samples.
pub fn class_recall(cm: &ConfusionMatrix, class: usize) -> Option<f64> {
    let support = cm.row_sum(class);
    if support == 0 {
        None
    } else {
        Some(cm.count(class, class) as f64 / support as f64)
    }
}

/// Mean of per-class recalls. Classes without any true samples are left out
/// of the mean rather than counted as zero.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let recalls: Vec<f64> = (0..cm.classes())
        .filter_map(|c| class_recall(cm, c))
        .collect();
    if recalls.is_empty() {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Micro-averaged precision: summed true positives over summed true-plus-
/// false positives. For single-label prediction this equals plain accuracy,
/// trace / total.
pub fn precision_micro(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let tp: u64 = cm.trace();
    let tp_fp: u64 = (0..cm.classes()).map(|c| cm.col_sum(c)).sum();
    if tp_fp == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(tp as f64 / tp_fp as f64)
}

/// One evaluation outcome: headline metrics plus timing, serializable as a
/// CSV row by the experiment harness.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub per_class_recall: Vec<Option<f64>>,
    pub samples: u64,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

impl MetricsReport {
    pub fn from_matrix(cm: &ConfusionMatrix) -> Result<Self, MetricsError> {
        Ok(MetricsReport {
            balanced_accuracy: balanced_accuracy(cm)?,
            precision: precision_micro(cm)?,
            per_class_recall: (0..cm.classes()).map(|c| class_recall(cm, c)).collect(),
            samples: cm.total(),
            train_seconds: 0.0,
            test_seconds: 0.0,
        })
    }
}

/// Sample mean with the half-width of its 95% Student-t confidence
/// interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
}

pub fn mean_ci(values: &[f64]) -> Result<MeanCi, MetricsError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::TooFewRuns { got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975);
    Ok(MeanCi {
        mean,
        half_width: t * var.sqrt() / (n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub balanced_accuracy: MeanCi,
    pub precision: MeanCi,
    pub train_seconds: MeanCi,
    pub test_seconds: MeanCi,
    pub runs: usize,
}

pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<Aggregate, MetricsError> {
    if reports.len() < 2 {
        return Err(MetricsError::TooFewRuns {
            got: reports.len(),
        });
    }
    let pick = |f: fn(&MetricsReport) -> f64| -> Result<MeanCi, MetricsError> {
        let values: Vec<f64> = reports.iter().map(f).collect();
        mean_ci(&values)
    };
    Ok(Aggregate {
        balanced_accuracy: pick(|r| r.balanced_accuracy)?,
        precision: pick(|r| r.precision)?,
        train_seconds: pick(|r| r.train_seconds)?,
        test_seconds: pick(|r| r.test_seconds)?,
        runs: reports.len(),
    })
}

/// Run a block under a monotonic wall clock; returns the block's result and
/// elapsed seconds.
pub fn timed<T>(block: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let result = block();
    (result, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm_from(rows: &[&[u64]]) -> ConfusionMatrix {
        let classes = rows.len();
        let mut cm = ConfusionMatrix::new(classes);
        for (t, row) in rows.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    cm.record(t, p);
                }
            }
        }
        cm
    }

    #[test]
    fn perfect_diagonal_scores_one() {
        let cm = cm_from(&[&[5, 0], &[0, 7]]);
        assert_eq!(balanced_accuracy(&cm).unwrap(), 1.0);
        assert_eq!(precision_micro(&cm).unwrap(), 1.0);
    }

    #[test]
    fn two_class_recalls_average() {
        // Recalls 1.0 and 0.5 -> 0.75.
        let cm = cm_from(&[&[4, 0], &[2, 2]]);
        assert!((balanced_accuracy(&cm).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn majority_predictor_on_nine_classes_scores_one_ninth() {
        let mut cm = ConfusionMatrix::new(9);
        for t in 0..9 {
            for _ in 0..50 {
                cm.record(t, 0);
            }
        }
        let ba = balanced_accuracy(&cm).unwrap();
        assert!((ba - 1.0 / 9.0).abs() < 1e-3);
    }

    #[test]
    fn precision_micro_is_trace_over_total() {
        let cm = cm_from(&[&[3, 1], &[1, 3]]);
        assert!((precision_micro(&cm).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn zero_support_class_is_excluded() {
        let cm = cm_from(&[&[4, 0, 0], &[0, 0, 0], &[1, 0, 3]]);
        // Class 1 has no true samples: mean over classes 0 and 2 only.
        assert!((balanced_accuracy(&cm).unwrap() - (1.0 + 0.75) / 2.0).abs() < 1e-12);
        let report = MetricsReport::from_matrix(&cm).unwrap();
        assert_eq!(report.per_class_recall[1], None);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let cm = ConfusionMatrix::new(3);
        assert_eq!(balanced_accuracy(&cm), Err(MetricsError::EmptyMatrix));
        assert_eq!(precision_micro(&cm), Err(MetricsError::EmptyMatrix));
    }

    #[test]
    fn ci_of_two_values_matches_t_table() {
        let ci = mean_ci(&[0.7, 0.8]).unwrap();
        assert!((ci.mean - 0.75).abs() < 1e-12);
        // t(0.975, dof 1) = 12.706; s = 0.0707; half = t*s/sqrt(2) = 0.635.
        assert!((ci.half_width - 0.635).abs() < 1e-3, "{}", ci.half_width);
    }

    #[test]
    fn identical_runs_have_zero_width() {
        let ci = mean_ci(&[0.5, 0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(ci.mean, 0.5);
        assert!(ci.half_width.abs() < 1e-12);
    }

    #[test]
    fn single_run_cannot_aggregate() {
        assert_eq!(mean_ci(&[0.5]), Err(MetricsError::TooFewRuns { got: 1 }));
    }

    #[test]
    fn timing_is_monotone() {
        let ((), inner) = timed(|| std::thread::sleep(std::time::Duration::from_millis(5)));
        let ((), outer) = timed(|| {
            let ((), _) = timed(|| std::thread::sleep(std::time::Duration::from_millis(5)));
        });
        assert!(inner >= 0.005);
        assert!(outer >= inner * 0.5);
    }

    proptest! {
        #[test]
        fn permutation_invariance(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::Rng;
            let mut rng = crate::rng::seed_rng(seed);
            let classes = rng.random_range(2..6usize);
            let mut cm = ConfusionMatrix::new(classes);
            for _ in 0..rng.random_range(1..200) {
                let t = rng.random_range(0..classes);
                let p = rng.random_range(0..classes);
                cm.record(t, p);
            }
            let mut perm: Vec<usize> = (0..classes).collect();
            perm.shuffle(&mut rng);
            let mut permuted = ConfusionMatrix::new(classes);
            for t in 0..classes {
                for p in 0..classes {
                    for _ in 0..cm.count(t, p) {
                        permuted.record(perm[t], perm[p]);
                    }
                }
            }
            let a = balanced_accuracy(&cm);
            let b = balanced_accuracy(&permuted);
            match (a, b) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "divergent results {other:?}"),
            }
        }

        #[test]
        fn aggregate_mean_is_bracketed(values in prop::collection::vec(0.0f64..1.0, 2..8)) {
            let ci = mean_ci(&values).unwrap();
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(ci.mean >= min - 1e-12 && ci.mean <= max + 1e-12);
        }
    }
}
