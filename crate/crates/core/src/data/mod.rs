//! Wafer-map datasets: the in-memory representation, one-hot channel
//! encoding, the on-disk WMD format, stratified splitting, two-domain
//! mini-batching, and a synthetic dataset generator for desk-scale
//! experiments.
//!
//! A wafer map is a grid of cell codes: 0 = blank spot (no die), 1 = a die
//! that tested good, 2 = a die that tested bad. Networks consume the
//! three-channel one-hot expansion of that grid.

mod batch;
mod split;
mod synth;
mod wmd;

pub use batch::{epoch_batches, MixedBatch, MixedBatches};
pub use split::{stratified_split, subsample};
pub use synth::{generate_synth, SynthSpec};
pub use wmd::{load_wmd, names_path, save_wmd};

use thiserror::Error;

use crate::tensor::Tensor;

/// Number of cell states, and therefore of image channels.
pub const CELL_STATES: usize = 3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {message} at byte {offset}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },
    #[error("{path}: expected {expected} class names, found {actual}")]
    NameCount {
        path: String,
        expected: usize,
        actual: usize,
    },
    #[error("cell code {code} outside 0..{}", CELL_STATES)]
    BadCell { code: u8 },
    #[error("sample shape {actual:?} does not match dataset shape {expected:?}")]
    SampleShape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("train fraction {fraction} outside (0, 1)")]
    BadFraction { fraction: f64 },
    #[error("requested {requested} samples but only {available} available")]
    SubsampleTooLarge { requested: usize, available: usize },
    #[error("{domain:?} dataset is empty")]
    EmptyDomain { domain: Domain },
    #[error("batch size {batch_size} must be even and positive")]
    BadBatchSize { batch_size: usize },
    #[error("synthetic geometry infeasible: image size {size} below minimum {min}")]
    SynthGeometry { size: usize, min: usize },
    #[error("synthetic spec needs at least 2 classes, got {classes}")]
    SynthClasses { classes: usize },
    #[error("synthetic per-class counts must all be positive ({actual} of {expected} classes have samples)")]
    SynthCounts { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_u8(self) -> u8 {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Domain> {
        match v {
            0 => Some(Domain::Source),
            1 => Some(Domain::Target),
            _ => None,
        }
    }

    /// Domain identity as the discriminator's training label.
    pub fn label(self) -> f64 {
        self.as_u8() as f64
    }
}

/// Where a dataset sits in the train/test lifecycle. Freshly loaded or
/// generated data is `Unsplit`; the splitter stamps its outputs so that
/// later stages can refuse data they must not see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Unsplit,
    Train,
    Test,
}

/// A raw wafer map: the grid of cell codes before channel expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaferMap {
    pub height: usize,
    pub width: usize,
    pub cells: Vec<u8>,
}

impl WaferMap {
    pub fn new(height: usize, width: usize, cells: Vec<u8>) -> Result<Self, DataError> {
        assert_eq!(cells.len(), height * width, "cell grid size mismatch");
        if let Some(&code) = cells.iter().find(|&&c| c as usize >= CELL_STATES) {
            return Err(DataError::BadCell { code });
        }
        Ok(WaferMap {
            height,
            width,
            cells,
        })
    }

    /// One-hot channel expansion: channel `c` is 1 exactly where the cell
    /// code equals `c`.
    pub fn encode(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.height, self.width, CELL_STATES]);
        for (i, &code) in self.cells.iter().enumerate() {
            t.data_mut()[i * CELL_STATES + code as usize] = 1.0;
        }
        t
    }

    /// Inverse of [`WaferMap::encode`] by per-pixel argmax. Also quantizes
    /// continuous images (autoencoder output) back to cell codes.
    pub fn from_image(image: &Tensor) -> WaferMap {
        let shape = image.shape();
        assert_eq!(shape.len(), 3, "image must be [H, W, C]");
        assert_eq!(shape[2], CELL_STATES);
        let cells = image
            .data()
            .chunks(CELL_STATES)
            .map(|px| {
                let mut best = 0usize;
                for c in 1..CELL_STATES {
                    if px[c] > px[best] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        WaferMap {
            height: shape[0],
            width: shape[1],
            cells,
        }
    }
}

/// One labeled image. `synthetic` marks augmentation output so the original
/// samples stay identifiable.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSample {
    pub image: Tensor,
    pub label: usize,
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub domain: Domain,
    pub provenance: Provenance,
    pub height: usize,
    pub width: usize,
    pub class_names: Vec<String>,
    pub samples: Vec<DomainSample>,
}

impl Dataset {
    pub fn new(domain: Domain, height: usize, width: usize, class_names: Vec<String>) -> Self {
        Dataset {
            domain,
            provenance: Provenance::Unsplit,
            height,
            width,
            class_names,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: DomainSample) -> Result<(), DataError> {
        let expected = [self.height, self.width, CELL_STATES];
        if sample.image.shape() != expected {
            return Err(DataError::SampleShape {
                expected: expected.to_vec(),
                actual: sample.image.shape().to_vec(),
            });
        }
        if sample.label >= self.class_names.len() {
            return Err(DataError::BadLabel {
                label: sample.label,
                classes: self.class_names.len(),
            });
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [self.height, self.width, CELL_STATES]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Empty dataset with this one's shape, domain and class table.
    pub fn like(&self, provenance: Provenance) -> Dataset {
        Dataset {
            domain: self.domain,
            provenance,
            height: self.height,
            width: self.width,
            class_names: self.class_names.clone(),
            samples: Vec::new(),
        }
    }
}

/// One-hot label vector of length `classes`.
pub fn one_hot_label(label: usize, classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[classes]);
    t.data_mut()[label] = 1.0;
    t
}

/// Index of the largest entry (first one on ties).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
