//! Undercomplete convolutional autoencoder augmentation: train on target
//! training data, then synthesize minority-class samples by perturbing
//! latent codes with Gaussian noise and decoding.
//!
//! The encoder is Conv 3x3 -> ReLU -> MaxPool (optionally a second pool
//! stage); the decoder is the transposed stack ending in a 3-channel conv
//! with a sigmoid head, so outputs live in (0,1) like the one-hot inputs.
//!
//! A 64-channel encoder with one pooling stage is NOT undercomplete for
//! small three-channel images (e.g. 26x26x3 gives a 12x12x64 latent, far
//! larger than the input). When no channel count is pinned, the builder
//! halves the channel count from 64 until the latent is strictly smaller
//! than the input; pinning an overcomplete configuration is an error unless
//! `allow_overcomplete` is set.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::{DataError, Dataset, DomainSample, Provenance};
use crate::layers::{Conv2D, ConvTranspose2D, Layer, MaxPool2D, Upsample2D};
use crate::network::Network;
use crate::optim::{adam_step, AdamState};
use crate::rng::{derive_seed, seed_rng, Stream};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("autoencoder input must have even height/width, got {height}x{width}")]
    OddInput { height: usize, width: usize },
    #[error(
        "latent has {latent} elements but the input only {input}; \
         an undercomplete autoencoder needs latent < input \
         (set allow_overcomplete to keep this architecture)"
    )]
    Overcomplete { latent: usize, input: usize },
    #[error("no channel count from 64 down to 1 gives an undercomplete latent for {input} input elements")]
    NoChannelFits { input: usize },
    #[error(
        "second pooling stage needs height and width congruent to 2 mod 4, got {height}x{width}"
    )]
    SecondPoolGeometry { height: usize, width: usize },
    #[error("autoencoder training must not see test data")]
    TestDataForbidden,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {class:?} has no original samples to synthesize from")]
    EmptyClass { class: String },
    #[error("reconstruction loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeConfig {
    /// Encoder channel count. `None` auto-selects: halve from 64 until the
    /// latent is smaller than the input.
    pub channels: Option<usize>,
    /// Second pooling stage. `None` auto-enables it for inputs of at least
    /// 24x24 whose geometry inverts cleanly.
    pub second_pool: Option<bool>,
    /// Permit a latent at least as large as the input (the literal
    /// 64-channel single-pool architecture).
    pub allow_overcomplete: bool,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            channels: None,
            second_pool: None,
            allow_overcomplete: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub encoder: Network,
    pub decoder: Network,
    pub input_shape: [usize; 3],
    pub latent_shape: Vec<usize>,
}

fn second_pool_invertible(height: usize, width: usize) -> bool {
    // After conv (H-2) and pool ((H-2)/2), a second pool halves again; the
    // decoder's extra upsampling only inverts it if (H-2)/2 is even.
    (height - 2) % 4 == 0 && (width - 2) % 4 == 0
}

fn build_with(
    input_shape: [usize; 3],
    channels: usize,
    second_pool: bool,
    rng: &mut ChaCha8Rng,
) -> Autoencoder {
    let mut enc_layers = vec![
        Layer::Conv2D(Conv2D::glorot(input_shape[2], channels, 3, rng)),
        Layer::ReLU,
        Layer::MaxPool2D(MaxPool2D { size: 2 }),
    ];
    if second_pool {
        enc_layers.push(Layer::MaxPool2D(MaxPool2D { size: 2 }));
    }
    let encoder = Network::new(enc_layers);

    // Paper-order decoder (convt, upsample, 3-channel conv, sigmoid); the
    // second pooling stage is undone by one extra leading upsample.
    let mut dec_layers = Vec::new();
    if second_pool {
        dec_layers.push(Layer::Upsample2D(Upsample2D { factor: 2 }));
        dec_layers.push(Layer::ConvTranspose2D(ConvTranspose2D::glorot(
            channels, channels, 3, rng,
        )));
        dec_layers.push(Layer::Upsample2D(Upsample2D { factor: 2 }));
    } else {
        dec_layers.push(Layer::ConvTranspose2D(ConvTranspose2D::glorot(
            channels, channels, 3, rng,
        )));
        dec_layers.push(Layer::Upsample2D(Upsample2D { factor: 2 }));
    }
    dec_layers.push(Layer::Conv2D(Conv2D::glorot(channels, input_shape[2], 3, rng)));
    dec_layers.push(Layer::Sigmoid);
    let decoder = Network::new(dec_layers);

    let latent_shape = encoder
        .output_shape(&input_shape)
        .expect("encoder geometry validated by caller");
    Autoencoder {
        encoder,
        decoder,
        input_shape,
        latent_shape,
    }
}

pub fn build_autoencoder(
    input_shape: [usize; 3],
    config: &AeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Autoencoder, AugmentError> {
    let [height, width, _] = input_shape;
    if height % 2 != 0 || width % 2 != 0 {
        return Err(AugmentError::OddInput { height, width });
    }
    let second_pool = match config.second_pool {
        Some(true) => {
            if !second_pool_invertible(height, width) {
                return Err(AugmentError::SecondPoolGeometry { height, width });
            }
            true
        }
        Some(false) => false,
        None => height.min(width) >= 24 && second_pool_invertible(height, width),
    };

    let input_elems: usize = input_shape.iter().product();
    let latent_elems = |ch: usize| -> usize {
        let (mut h, mut w) = ((height - 2) / 2, (width - 2) / 2);
        if second_pool {
            h /= 2;
            w /= 2;
        }
        h * w * ch
    };

    let channels = match config.channels {
        Some(ch) => {
            if latent_elems(ch) >= input_elems && !config.allow_overcomplete {
                return Err(AugmentError::Overcomplete {
                    latent: latent_elems(ch),
                    input: input_elems,
                });
            }
            ch
        }
        None => {
            let mut ch = 64;
            loop {
                if latent_elems(ch) < input_elems {
                    break ch;
                }
                if ch == 1 {
                    return Err(AugmentError::NoChannelFits { input: input_elems });
                }
                ch /= 2;
            }
        }
    };

    let ae = build_with(input_shape, channels, second_pool, rng);
    debug_assert_eq!(
        ae.decoder
            .output_shape(&ae.latent_shape)
            .expect("decoder accepts the latent"),
        input_shape.to_vec()
    );
    Ok(ae)
}

impl Autoencoder {
    pub fn latent_elems(&self) -> usize {
        self.latent_shape.iter().product()
    }

    pub fn reconstruct(&self, image: &Tensor) -> Result<Tensor, TensorError> {
        let latent = self.encoder.infer(image)?;
        self.decoder.infer(&latent)
    }
}

/// Train by minimizing squared reconstruction error with Adam. Returns the
/// per-epoch history of mean squared error per element. Refuses datasets
/// stamped as test data: augmentation must never see the test split.
pub fn train_autoencoder(
    ae: &mut Autoencoder,
    dataset: &Dataset,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<Vec<f64>, AugmentError> {
    if dataset.provenance == Provenance::Test {
        return Err(AugmentError::TestDataForbidden);
    }
    if dataset.is_empty() {
        return Err(AugmentError::EmptyDataset);
    }

    let mut batch_rng = seed_rng(derive_seed(seed, Stream::Batch));
    let mut enc_state = AdamState::for_network(&ae.encoder);
    let mut dec_state = AdamState::for_network(&ae.decoder);
    let mut history = Vec::with_capacity(epochs);
    let numel = dataset.image_shape().iter().product::<usize>() as f64;

    for epoch in 0..epochs {
        let mut epoch_loss = 0.0;
        for batch in crate::data::epoch_batches(dataset.len(), batch_size, &mut batch_rng) {
            let mut enc_grads = ae.encoder.zero_grads(&dataset.image_shape());
            let mut dec_grads = ae.decoder.zero_grads(&ae.latent_shape);
            for &i in &batch {
                let x = &dataset.samples[i].image;
                let enc_trace = ae.encoder.forward(x)?;
                let dec_trace = ae.decoder.forward(enc_trace.output())?;
                let x_hat = dec_trace.output();

                epoch_loss += x.sq_dist(x_hat) / numel;

                // d/dx_hat of mean squared error per element.
                let mut grad = x_hat.clone();
                for (g, &t) in grad.data_mut().iter_mut().zip(x.data()) {
                    *g = 2.0 * (*g - t) / numel;
                }
                let d = ae.decoder.backward(&dec_trace, &grad)?;
                let e = ae.encoder.backward(&enc_trace, &d.input)?;
                dec_grads.add(&d);
                enc_grads.add(&e);
            }
            let scale = 1.0 / batch.len() as f64;
            enc_grads.scale(scale);
            dec_grads.scale(scale);
            adam_step(&mut ae.encoder, &enc_grads, &mut enc_state, lr);
            adam_step(&mut ae.decoder, &dec_grads, &mut dec_state, lr);
        }
        let mean = epoch_loss / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(AugmentError::Diverged { epoch });
        }
        history.push(mean);
    }
    Ok(history)
}

/// One synthetic sample: encode, add elementwise Gaussian noise to the
/// latent code, decode. Label and domain carry over from the seed sample.
pub fn generate_synthetic(
    ae: &Autoencoder,
    sample: &DomainSample,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DomainSample, AugmentError> {
    let mut latent = ae.encoder.infer(&sample.image)?;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("positive std");
        for v in latent.data_mut().iter_mut() {
            *v += normal.sample(rng);
        }
    }
    let image = ae.decoder.infer(&latent)?;
    Ok(DomainSample {
        image,
        label: sample.label,
        synthetic: true,
    })
}

/// How far to grow each class, plus the noise scale and RNG seed used while
/// synthesizing.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPlan {
    /// Desired total count per class; classes already at or above their
    /// entry are left untouched.
    pub target_counts: Vec<usize>,
    pub noise_std: f64,
    pub seed: u64,
}

impl AugmentPlan {
    /// Equalize every class up to the current maximum count.
    pub fn to_max(dataset: &Dataset, noise_std: f64, seed: u64) -> Self {
        let max = dataset.class_counts().into_iter().max().unwrap_or(0);
        AugmentPlan {
            target_counts: vec![max; dataset.num_classes()],
            noise_std,
            seed,
        }
    }

    /// Equalize every class up to a fixed total.
    pub fn to_total(dataset: &Dataset, total: usize, noise_std: f64, seed: u64) -> Self {
        AugmentPlan {
            target_counts: vec![total; dataset.num_classes()],
            noise_std,
            seed,
        }
    }

    /// Add a fixed number of synthetics to every class except the listed
    /// ones (e.g. skip an abundant majority class).
    pub fn add_per_class(dataset: &Dataset, add: usize, skip: &[usize], noise_std: f64, seed: u64) -> Self {
        let target_counts = dataset
            .class_counts()
            .into_iter()
            .enumerate()
            .map(|(c, n)| if skip.contains(&c) { n } else { n + add })
            .collect();
        AugmentPlan {
            target_counts,
            noise_std,
            seed,
        }
    }
}

/// Grow minority classes to their planned counts by repeatedly drawing an
/// original sample of the class and appending a synthetic perturbation of
/// it. Originals are all retained unchanged.
pub fn balance_dataset(
    dataset: &Dataset,
    plan: &AugmentPlan,
    ae: &Autoencoder,
) -> Result<Dataset, AugmentError> {
    use rand::Rng;
    assert_eq!(
        plan.target_counts.len(),
        dataset.num_classes(),
        "plan covers every class"
    );
    let mut rng = seed_rng(derive_seed(plan.seed, Stream::Augment));
    let mut out = dataset.clone();
    let counts = dataset.class_counts();
    for (class, (&have, &want)) in counts.iter().zip(&plan.target_counts).enumerate() {
        if have >= want {
            continue;
        }
        if have == 0 {
            return Err(AugmentError::EmptyClass {
                class: dataset.class_names[class].clone(),
            });
        }
        let originals: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        for _ in 0..(want - have) {
            let seed_sample = &dataset.samples[originals[rng.random_range(0..originals.len())]];
            let synthetic = generate_synthetic(ae, seed_sample, plan.noise_std, &mut rng)?;
            out.push(synthetic)?;
        }
    }
    Ok(out)
}
