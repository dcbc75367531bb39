//! Synthetic two-domain wafer-map generator. Produces a balanced source
//! dataset and an (optionally imbalanced) target dataset over the same
//! defect classes at different resolutions, so domain-shift experiments
//! run without any external corpus.
//!
//! Defect geometry imitates classic wafer patterns: a ring near the rim, a
//! center blob, an edge band, and random speckle — all drawn inside the
//! wafer disc, with per-sample geometric jitter and cell-flip noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset, Domain, DomainSample, Provenance, WaferMap};
use crate::rng::{derive_seed, seed_rng, Stream};

const MIN_SIZE: usize = 8;
const KIND_NAMES: [&str; 4] = ["ring", "center", "edge", "speckle"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Source images are square with this side length.
    pub source_size: usize,
    /// Target images are square with this side length.
    pub target_size: usize,
    /// Samples per class in the (balanced) source dataset.
    pub source_per_class: usize,
    /// Per-class sample counts for the target dataset; its length fixes the
    /// class count for both domains.
    pub target_counts: Vec<usize>,
    /// Probability that an in-disc cell flips between good and defect.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            source_size: 16,
            target_size: 12,
            source_per_class: 400,
            target_counts: vec![300, 30, 30, 30],
            noise_rate: 0.02,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn classes(&self) -> usize {
        self.target_counts.len()
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes())
            .map(|c| {
                let kind = KIND_NAMES[c % KIND_NAMES.len()];
                let variant = c / KIND_NAMES.len();
                if variant == 0 {
                    kind.to_string()
                } else {
                    format!("{kind}{}", variant + 1)
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.classes() < 2 {
            return Err(DataError::SynthClasses {
                classes: self.classes(),
            });
        }
        for &size in &[self.source_size, self.target_size] {
            if size < MIN_SIZE {
                return Err(DataError::SynthGeometry {
                    size,
                    min: MIN_SIZE,
                });
            }
        }
        if self.source_per_class == 0 || self.target_counts.iter().any(|&n| n == 0) {
            return Err(DataError::SynthCounts {
                expected: self.classes(),
                actual: self.target_counts.iter().filter(|&&n| n > 0).count(),
            });
        }
        Ok(())
    }
}

pub fn generate_synth(spec: &SynthSpec) -> Result<(Dataset, Dataset), DataError> {
    spec.validate()?;
    let names = spec.class_names();

    let mut source = Dataset::new(
        Domain::Source,
        spec.source_size,
        spec.source_size,
        names.clone(),
    );
    let mut src_rng = seed_rng(derive_seed(spec.seed, Stream::Synth));
    for class in 0..spec.classes() {
        for _ in 0..spec.source_per_class {
            let map = render(class, spec.source_size, spec.noise_rate, &mut src_rng);
            source
                .push(DomainSample {
                    image: map.encode(),
                    label: class,
                    synthetic: false,
                })
                .expect("generated sample is well formed");
        }
    }

    let mut target = Dataset::new(
        Domain::Target,
        spec.target_size,
        spec.target_size,
        names,
    );
    let mut tgt_rng = seed_rng(derive_seed(spec.seed.wrapping_add(1), Stream::Synth));
    for (class, &count) in spec.target_counts.iter().enumerate() {
        for _ in 0..count {
            let map = render(class, spec.target_size, spec.noise_rate, &mut tgt_rng);
            target
                .push(DomainSample {
                    image: map.encode(),
                    label: class,
                    synthetic: false,
                })
                .expect("generated sample is well formed");
        }
    }

    source.provenance = Provenance::Unsplit;
    target.provenance = Provenance::Unsplit;
    Ok((source, target))
}

/// Draw one wafer map of the given class. Cells outside the inscribed disc
/// stay blank; inside, the class pattern marks defects and noise flips
/// good/defect cells.
///
/// Every geometric parameter is drawn fresh per sample — ring radius and
/// width, blob size and position, edge orientation and band width, speckle
/// density — so a handful of examples cannot span a class. That is the
/// point of the benchmark: labeled-data volume has to matter, as it does
/// on real wafer corpora. Classes past the first four reuse the base kinds
/// with shifted parameter ranges; those variants overlap their base class
/// noticeably and are only meant for smoke tests.
fn render(class: usize, size: usize, noise_rate: f64, rng: &mut ChaCha8Rng) -> WaferMap {
    let kind = class % KIND_NAMES.len();
    let variant = (class / KIND_NAMES.len()) as f64;
    let center = (size as f64 - 1.0) / 2.0;
    let radius = size as f64 / 2.0 - 0.5;

    let ring_radius = radius * (rng.random_range(0.58..0.88) - 0.10 * variant);
    let ring_width = (size as f64 / 14.0).max(0.75) * rng.random_range(0.7..1.6);
    // The blob is kept strictly interior (its rim clearance is at least 8%
    // of the wafer radius) so it can never be mistaken for the rim-hugging
    // crescent class.
    let blob_radius = radius * (rng.random_range(0.22..0.52) + 0.08 * variant);
    let max_offset = (0.92 * radius - blob_radius).max(0.0);
    let blob_angle = rng.random_range(0.0..std::f64::consts::TAU);
    let blob_offset = max_offset * rng.random_range(0.0..1.0f64).sqrt();
    let blob_cy = center + blob_offset * blob_angle.sin();
    let blob_cx = center + blob_offset * blob_angle.cos();
    // The crescent is the chord segment deeper than `radius - band` along a
    // uniformly random direction; orientation is continuous, so covering the
    // class takes many examples.
    let band = radius * (rng.random_range(0.35..0.80) + 0.08 * variant);
    let edge_angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (edge_uy, edge_ux) = edge_angle.sin_cos();
    let speckle_p = rng.random_range(0.06..0.20) + 0.04 * variant;

    let mut cells = vec![0u8; size * size];
    for y in 0..size {
        for x in 0..size {
            let dy = y as f64 - center;
            let dx = x as f64 - center;
            let dist = (dy * dy + dx * dx).sqrt();
            if dist > radius + 0.1 {
                continue; // blank: off the wafer
            }
            let defect = match kind {
                0 => (dist - ring_radius).abs() <= ring_width,
                1 => {
                    let by = y as f64 - blob_cy;
                    let bx = x as f64 - blob_cx;
                    (by * by + bx * bx).sqrt() <= blob_radius
                }
                2 => dy * edge_uy + dx * edge_ux >= radius - band,
                _ => rng.random::<f64>() < speckle_p,
            };
            let mut code = if defect { 2 } else { 1 };
            if rng.random::<f64>() < noise_rate {
                code = 3 - code; // flip good <-> defect
            }
            cells[y * size + x] = code;
        }
    }
    WaferMap::new(size, size, cells).expect("codes in range by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_classes_match_the_spec() {
        let spec = SynthSpec {
            source_size: 16,
            target_size: 12,
            source_per_class: 10,
            target_counts: vec![20, 5, 5, 5],
            ..SynthSpec::default()
        };
        let (source, target) = generate_synth(&spec).unwrap();
        assert_eq!(source.image_shape(), [16, 16, 3]);
        assert_eq!(target.image_shape(), [12, 12, 3]);
        assert_eq!(source.class_names, target.class_names);
        assert_eq!(source.class_names, vec!["ring", "center", "edge", "speckle"]);
        assert_eq!(source.class_counts(), vec![10, 10, 10, 10]);
    }

    #[test]
    fn imbalance_ratio_is_honored_exactly() {
        let spec = SynthSpec {
            source_per_class: 5,
            target_counts: vec![100, 10, 10, 10],
            ..SynthSpec::default()
        };
        let (_, target) = generate_synth(&spec).unwrap();
        assert_eq!(target.class_counts(), vec![100, 10, 10, 10]);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = SynthSpec {
            source_per_class: 8,
            target_counts: vec![8, 8],
            ..SynthSpec::default()
        };
        let a = generate_synth(&spec).unwrap();
        let b = generate_synth(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synth(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_images_are_rejected() {
        let spec = SynthSpec {
            target_size: 4,
            ..SynthSpec::default()
        };
        assert!(matches!(
            generate_synth(&spec),
            Err(DataError::SynthGeometry { size: 4, min: 8 })
        ));
    }

    #[test]
    fn fewer_than_two_classes_rejected() {
        let spec = SynthSpec {
            target_counts: vec![10],
            ..SynthSpec::default()
        };
        assert!(matches!(
            generate_synth(&spec),
            Err(DataError::SynthClasses { classes: 1 })
        ));
    }

    #[test]
    fn classes_are_visually_distinct_on_average() {
        // Mean images of different classes should be well separated, or
        // no classifier stands a chance.
        let spec = SynthSpec {
            source_per_class: 50,
            target_counts: vec![50, 50, 50, 50],
            ..SynthSpec::default()
        };
        let (source, _) = generate_synth(&spec).unwrap();
        let n = source.image_shape().iter().product::<usize>();
        let mut means = vec![vec![0.0f64; n]; 4];
        for s in &source.samples {
            for (m, v) in means[s.label].iter_mut().zip(s.image.data()) {
                *m += v / 50.0;
            }
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                let dist: f64 = means[a]
                    .iter()
                    .zip(&means[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                assert!(
                    dist > 1.0,
                    "classes {a} and {b} nearly identical (sq dist {dist})"
                );
            }
        }
    }

    #[test]
    fn eight_class_spec_generates_variants() {
        let spec = SynthSpec {
            source_per_class: 2,
            target_counts: vec![2; 8],
            ..SynthSpec::default()
        };
        let (source, _) = generate_synth(&spec).unwrap();
        assert_eq!(
            source.class_names,
            vec!["ring", "center", "edge", "speckle", "ring2", "center2", "edge2", "speckle2"]
        );
    }
}
