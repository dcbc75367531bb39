//! The vanilla CNN classifier trained directly on one dataset, used as the
//! comparison floor for the domain-adaptation pipeline.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adversarial::cross_entropy;
use crate::data::{epoch_batches, one_hot_label, DataError, Dataset};
use crate::layers::{Conv2D, Dense, Layer};
use crate::network::Network;
use crate::optim::{AdamState, adam_step};
use crate::rng::{derive_seed, seed_rng, Stream};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("non-finite training loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("dataset image shape {actual:?} does not match the model input {expected:?}")]
    InputShape {
        expected: [usize; 3],
        actual: [usize; 3],
    },
    #[error("dataset declares {dataset} classes but the model head expects {model}")]
    ClassCount { dataset: usize, model: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A plain convolutional classifier: no domain machinery, trained and
/// evaluated on a single domain's data.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub net: Network,
    pub input_shape: [usize; 3],
    pub class_count: usize,
}

impl BaselineModel {
    /// Class probabilities for one image.
    pub fn predict(&self, image: &Tensor) -> Result<Tensor, TensorError> {
        self.net.infer(image)
    }
}

/// Build the vanilla classifier: three 3x3 valid convolutions with 16, 64
/// and 128 filters (each followed by ReLU, no pooling), dense layers of 512
/// and 128 units, and a `class_count`-way softmax head.
///
/// The parameter count is fully determined by the input shape; for a
/// 26x26x3 input and 9 classes it is 26,365,321 parameters, dominated by
/// the first dense layer absorbing the 20x20x128 conv output.
pub fn build_vanilla(
    input_shape: [usize; 3],
    class_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BaselineModel, TensorError> {
    let trunk = Network::new(vec![
        Layer::Conv2D(Conv2D::glorot(input_shape[2], 16, 3, rng)),
        Layer::ReLU,
        Layer::Conv2D(Conv2D::glorot(16, 64, 3, rng)),
        Layer::ReLU,
        Layer::Conv2D(Conv2D::glorot(64, 128, 3, rng)),
        Layer::ReLU,
    ]);
    let flat: usize = trunk.output_shape(&input_shape)?.iter().product();
    let mut layers = trunk.layers;
    layers.push(Layer::Dense(Dense::glorot(flat, 512, rng)));
    layers.push(Layer::ReLU);
    layers.push(Layer::Dense(Dense::glorot(512, 128, rng)));
    layers.push(Layer::ReLU);
    layers.push(Layer::Dense(Dense::glorot(128, class_count, rng)));
    layers.push(Layer::Softmax);
    Ok(BaselineModel {
        net: Network::new(layers),
        input_shape,
        class_count,
    })
}

/// Outcome of a training run: the per-epoch mean training loss and the
/// epoch whose parameter snapshot the model was left at. `best_epoch` is
/// `None` only when no epochs ran.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTraining {
    pub history: Vec<f64>,
    pub best_epoch: Option<usize>,
}

/// Train with Adam on the mean cross-entropy of shuffled mini-batches.
///
/// Every epoch's mean training loss is recorded; after the final epoch the
/// model is rolled back to the parameters of the best (lowest-loss) epoch,
/// so a late deterioration cannot leak into evaluation.
pub fn train_baseline(
    model: &mut BaselineModel,
    dataset: &Dataset,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<BaselineTraining, BaselineError> {
    if dataset.is_empty() {
        return Err(DataError::EmptyDataset.into());
    }
    if batch_size == 0 {
        return Err(DataError::BadBatchSize { batch_size }.into());
    }
    let actual = dataset.image_shape();
    if actual != model.input_shape {
        return Err(BaselineError::InputShape {
            expected: model.input_shape,
            actual,
        });
    }
    if dataset.num_classes() != model.class_count {
        return Err(BaselineError::ClassCount {
            dataset: dataset.num_classes(),
            model: model.class_count,
        });
    }

    let mut batch_rng = seed_rng(derive_seed(seed, Stream::Batch));
    let mut adam = AdamState::for_network(&model.net);
    let mut history = Vec::with_capacity(epochs);
    let mut best: Option<(usize, f64, Network)> = None;

    for epoch in 0..epochs {
        let mut epoch_loss = 0.0;
        for batch in epoch_batches(dataset.len(), batch_size, &mut batch_rng) {
            let mut grads = model.net.zero_grads(&model.input_shape);
            for &i in &batch {
                let sample = &dataset.samples[i];
                let trace = model.net.forward(&sample.image)?;
                let one_hot = one_hot_label(sample.label, model.class_count);
                let (loss, out_grad) = cross_entropy(trace.output(), &one_hot, 1.0);
                epoch_loss += loss;
                grads.add(&model.net.backward(&trace, &out_grad)?);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut model.net, &grads, &mut adam, lr);
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        if !mean_loss.is_finite() {
            return Err(BaselineError::Diverged { epoch });
        }
        history.push(mean_loss);
        let improved = match &best {
            Some((_, best_loss, _)) => mean_loss < *best_loss,
            None => true,
        };
        if improved {
            best = Some((epoch, mean_loss, model.net.clone()));
        }
    }

    let best_epoch = match best {
        Some((epoch, _, net)) => {
            model.net = net;
            Some(epoch)
        }
        None => None,
    };
    Ok(BaselineTraining {
        history,
        best_epoch,
    })
}
