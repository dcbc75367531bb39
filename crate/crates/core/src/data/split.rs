//! Seeded dataset partitioning: per-class stratified train/test splitting
//! and uniform subsampling.

use rand::seq::SliceRandom;

use super::{DataError, Dataset, Provenance};
use crate::rng::seed_rng;

/// Split per class: `round(train_fraction * n)` samples go to train (at
/// least 1), the rest to test. A class with exactly one sample has that
/// sample duplicated into both splits, so no class ever vanishes from the
/// test side for want of data.
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadFraction {
            fraction: train_fraction,
        });
    }
    if dataset.is_empty() {
        return Err(DataError::EmptyDataset);
    }

    let mut rng = seed_rng(seed);
    let mut train = dataset.like(Provenance::Train);
    let mut test = dataset.like(Provenance::Test);

    for class in 0..dataset.num_classes() {
        let mut indices: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        if indices.len() == 1 {
            let sample = dataset.samples[indices[0]].clone();
            train.samples.push(sample.clone());
            test.samples.push(sample);
            continue;
        }
        indices.shuffle(&mut rng);
        let n_train = ((train_fraction * indices.len() as f64).round() as usize)
            .clamp(1, indices.len());
        for (i, &idx) in indices.iter().enumerate() {
            let sample = dataset.samples[idx].clone();
            if i < n_train {
                train.samples.push(sample);
            } else {
                test.samples.push(sample);
            }
        }
    }
    Ok((train, test))
}

/// Uniform random subset of size `n`, keeping domain/provenance/classes.
pub fn subsample(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset, DataError> {
    if n > dataset.len() {
        return Err(DataError::SubsampleTooLarge {
            requested: n,
            available: dataset.len(),
        });
    }
    let mut rng = seed_rng(seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut rng);
    let mut out = dataset.like(dataset.provenance);
    for &i in indices.iter().take(n) {
        out.samples.push(dataset.samples[i].clone());
    }
    Ok(out)
}
