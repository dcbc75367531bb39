//! Model checkpoints: a self-describing binary container that captures every
//! parameter tensor together with the training configuration and master seed,
//! so a saved model reloads bit-exactly.
//!
//! On-disk layout (all integers and doubles little-endian):
//!
//! ```text
//! magic "DAC1" (4 bytes)
//! u8  kind (0 = domain-adaptation model, 1 = vanilla baseline model)
//! u64 master seed
//! kind 0: f64 target_loss_weight, f64 adversarial_weight,
//!         f64 classification_weight, f64 learning_rate,
//!         u32 batch_size, u32 iterations, u8 optimizer (0 = adam, 1 = sgd)
//!         u32 source H, W, C; u32 target H, W, C; u32 class count
//!         5 network sections: source_gen, target_gen, shared_gen,
//!         discriminator, classifier
//! kind 1: f64 learning_rate, u32 epochs, u32 batch_size
//!         u32 input H, W, C; u32 class count
//!         1 network section: network
//! ```
//!
//! A network section is a length-prefixed ASCII name (u8 length), a u32 layer
//! count, then one record per layer: a u8 tag followed by the layer's
//! configuration and raw parameter doubles. Parameter tensors are identified
//! positionally (network name, layer index, weights-then-bias); their shapes
//! are implied by the configuration integers that precede them:
//!
//! ```text
//! 0 Conv2D:          u32 filters, kernel, in_channels; weights F*K*K*C; bias F
//! 1 ConvTranspose2D: same encoding as Conv2D
//! 2 MaxPool2D:       u32 pool size
//! 3 Upsample2D:      u32 factor
//! 4 Dense:           u32 outputs, inputs; weights out*in; bias out
//! 5 ReLU, 6 Sigmoid, 7 Softmax: no payload
//! 8 Reshape:         u32 rank, then rank u32 dims
//! ```
//!
//! Doubles are stored as raw IEEE-754 bit patterns, so round-trips preserve
//! parameters exactly. Loading re-validates the model's wiring, so a corrupt
//! or hand-edited file cannot produce a structurally broken model.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::adversarial::{DaModel, HyperParams, TrainError};
use crate::baseline::BaselineModel;
use crate::layers::{Conv2D, ConvTranspose2D, Dense, Layer, MaxPool2D, Reshape, Upsample2D};
use crate::network::Network;
use crate::optim::OptimizerKind;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"DAC1";

const KIND_DA: u8 = 0;
const KIND_VANILLA: u8 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {message} at byte {offset}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },
    #[error("{path}: loaded model fails validation: {source}")]
    Invalid {
        path: String,
        #[source]
        source: TrainError,
    },
}

/// A complete saved model: the networks plus everything needed to state how
/// they were (or will be) trained. The two variants share one container
/// format, distinguished by a kind byte.
#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    DomainAdaptation {
        model: DaModel,
        hyper: HyperParams,
        seed: u64,
    },
    Vanilla {
        model: BaselineModel,
        learning_rate: f64,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    },
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, offset: usize, message: impl Into<String>) -> CheckpointError {
        CheckpointError::Format {
            path: self.path.display().to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.offset + n > self.bytes.len() {
            return Err(self.fail(
                self.bytes.len(),
                format!("truncated while reading {what}"),
            ));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4-byte slice")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8-byte slice")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, CheckpointError> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8-byte slice")))
    }

    fn usize(&mut self, what: &str) -> Result<usize, CheckpointError> {
        Ok(self.u32(what)? as usize)
    }

    /// Read `count` raw doubles into a tensor of the given shape.
    fn tensor(&mut self, shape: &[usize], what: &str) -> Result<Tensor, CheckpointError> {
        let count: usize = shape.iter().product();
        let bytes = self.take(count * 8, what)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Tensor::from_vec(shape, data).expect("shape and element count agree"))
    }
}

fn push_u32(buf: &mut Vec<u8>, value: usize) {
    let v = u32::try_from(value).expect("dimension fits in u32");
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, value: f64) {
    buf.extend_from_slice(&value.to_le_bytes());
}

fn push_tensor(buf: &mut Vec<u8>, t: &Tensor) {
    for &v in t.data() {
        push_f64(buf, v);
    }
}

fn write_layer(buf: &mut Vec<u8>, layer: &Layer) {
    match layer {
        Layer::Conv2D(c) => {
            buf.push(0);
            push_u32(buf, c.filters());
            push_u32(buf, c.kernel());
            push_u32(buf, c.in_channels());
            push_tensor(buf, &c.weights);
            push_tensor(buf, &c.bias);
        }
        Layer::ConvTranspose2D(c) => {
            buf.push(1);
            push_u32(buf, c.filters());
            push_u32(buf, c.kernel());
            push_u32(buf, c.in_channels());
            push_tensor(buf, &c.weights);
            push_tensor(buf, &c.bias);
        }
        Layer::MaxPool2D(p) => {
            buf.push(2);
            push_u32(buf, p.size);
        }
        Layer::Upsample2D(u) => {
            buf.push(3);
            push_u32(buf, u.factor);
        }
        Layer::Dense(d) => {
            buf.push(4);
            push_u32(buf, d.outputs());
            push_u32(buf, d.inputs());
            push_tensor(buf, &d.weights);
            push_tensor(buf, &d.bias);
        }
        Layer::ReLU => buf.push(5),
        Layer::Sigmoid => buf.push(6),
        Layer::Softmax => buf.push(7),
        Layer::Reshape(r) => {
            buf.push(8);
            push_u32(buf, r.target.len());
            for &dim in &r.target {
                push_u32(buf, dim);
            }
        }
    }
}

fn read_layer(r: &mut Reader) -> Result<Layer, CheckpointError> {
    let at = r.offset;
    let tag = r.u8("layer tag")?;
    let layer = match tag {
        0 | 1 => {
            let filters = r.usize("conv filters")?;
            let kernel = r.usize("conv kernel")?;
            let in_channels = r.usize("conv in_channels")?;
            if filters == 0 || kernel == 0 || in_channels == 0 {
                return Err(r.fail(at, "conv layer with zero-sized dimension"));
            }
            let weights = r.tensor(&[filters, kernel, kernel, in_channels], "conv weights")?;
            let bias = r.tensor(&[filters], "conv bias")?;
            if tag == 0 {
                Layer::Conv2D(Conv2D { weights, bias })
            } else {
                Layer::ConvTranspose2D(ConvTranspose2D { weights, bias })
            }
        }
        2 => {
            let size = r.usize("pool size")?;
            if size == 0 {
                return Err(r.fail(at, "pool size zero"));
            }
            Layer::MaxPool2D(MaxPool2D { size })
        }
        3 => {
            let factor = r.usize("upsample factor")?;
            if factor == 0 {
                return Err(r.fail(at, "upsample factor zero"));
            }
            Layer::Upsample2D(Upsample2D { factor })
        }
        4 => {
            let outputs = r.usize("dense outputs")?;
            let inputs = r.usize("dense inputs")?;
            if outputs == 0 || inputs == 0 {
                return Err(r.fail(at, "dense layer with zero-sized dimension"));
            }
            let weights = r.tensor(&[outputs, inputs], "dense weights")?;
            let bias = r.tensor(&[outputs], "dense bias")?;
            Layer::Dense(Dense { weights, bias })
        }
        5 => Layer::ReLU,
        6 => Layer::Sigmoid,
        7 => Layer::Softmax,
        8 => {
            let rank = r.usize("reshape rank")?;
            if rank == 0 {
                return Err(r.fail(at, "reshape with zero rank"));
            }
            let mut target = Vec::with_capacity(rank);
            for _ in 0..rank {
                target.push(r.usize("reshape dim")?);
            }
            Layer::Reshape(Reshape { target })
        }
        other => return Err(r.fail(at, format!("unknown layer tag {other}"))),
    };
    Ok(layer)
}

fn write_network(buf: &mut Vec<u8>, name: &str, net: &Network) {
    debug_assert!(name.len() <= u8::MAX as usize && name.is_ascii());
    buf.push(name.len() as u8);
    buf.extend_from_slice(name.as_bytes());
    push_u32(buf, net.layers.len());
    for layer in &net.layers {
        write_layer(buf, layer);
    }
}

fn read_network(r: &mut Reader, expected_name: &str) -> Result<Network, CheckpointError> {
    let at = r.offset;
    let name_len = r.u8("network name length")? as usize;
    let name_bytes = r.take(name_len, "network name")?;
    if name_bytes != expected_name.as_bytes() {
        let got = String::from_utf8_lossy(name_bytes).into_owned();
        return Err(r.fail(
            at,
            format!("expected network {expected_name:?}, found {got:?}"),
        ));
    }
    let layer_count = r.usize("layer count")?;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        layers.push(read_layer(r)?);
    }
    Ok(Network { layers })
}

fn write_shape(buf: &mut Vec<u8>, shape: &[usize; 3]) {
    for &dim in shape {
        push_u32(buf, dim);
    }
}

fn read_shape(r: &mut Reader, what: &str) -> Result<[usize; 3], CheckpointError> {
    Ok([r.usize(what)?, r.usize(what)?, r.usize(what)?])
}

fn optimizer_code(kind: OptimizerKind) -> u8 {
    match kind {
        OptimizerKind::Adam => 0,
        OptimizerKind::Sgd => 1,
    }
}

/// Serialize a checkpoint into its canonical byte form.
pub fn encode_checkpoint(checkpoint: &Checkpoint) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    match checkpoint {
        Checkpoint::DomainAdaptation { model, hyper, seed } => {
            buf.push(KIND_DA);
            buf.extend_from_slice(&seed.to_le_bytes());
            push_f64(&mut buf, hyper.target_loss_weight);
            push_f64(&mut buf, hyper.adversarial_weight);
            push_f64(&mut buf, hyper.classification_weight);
            push_f64(&mut buf, hyper.learning_rate);
            push_u32(&mut buf, hyper.batch_size);
            push_u32(&mut buf, hyper.iterations);
            buf.push(optimizer_code(hyper.optimizer));
            write_shape(&mut buf, &model.source_shape);
            write_shape(&mut buf, &model.target_shape);
            push_u32(&mut buf, model.class_count);
            write_network(&mut buf, "source_gen", &model.source_gen);
            write_network(&mut buf, "target_gen", &model.target_gen);
            write_network(&mut buf, "shared_gen", &model.shared_gen);
            write_network(&mut buf, "discriminator", &model.discriminator);
            write_network(&mut buf, "classifier", &model.classifier);
        }
        Checkpoint::Vanilla {
            model,
            learning_rate,
            epochs,
            batch_size,
            seed,
        } => {
            buf.push(KIND_VANILLA);
            buf.extend_from_slice(&seed.to_le_bytes());
            push_f64(&mut buf, *learning_rate);
            push_u32(&mut buf, *epochs);
            push_u32(&mut buf, *batch_size);
            write_shape(&mut buf, &model.input_shape);
            push_u32(&mut buf, model.class_count);
            write_network(&mut buf, "network", &model.net);
        }
    }
    buf
}

/// Write a checkpoint to disk in the documented container format.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(checkpoint))?;
    Ok(())
}

/// Load a checkpoint, validating the container and the reconstructed model's
/// wiring. The returned value is bit-identical to what was saved.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        offset: 0,
    };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(r.fail(0, format!("bad magic {magic:02x?}, expected \"DAC1\"")));
    }
    let kind_at = r.offset;
    let kind = r.u8("model kind")?;
    let seed = r.u64("seed")?;
    let checkpoint = match kind {
        KIND_DA => {
            let target_loss_weight = r.f64("target loss weight")?;
            let adversarial_weight = r.f64("adversarial weight")?;
            let classification_weight = r.f64("classification weight")?;
            let learning_rate = r.f64("learning rate")?;
            let batch_size = r.usize("batch size")?;
            let iterations = r.usize("iterations")?;
            let opt_at = r.offset;
            let optimizer = match r.u8("optimizer code")? {
                0 => OptimizerKind::Adam,
                1 => OptimizerKind::Sgd,
                other => return Err(r.fail(opt_at, format!("unknown optimizer code {other}"))),
            };
            let hyper = HyperParams {
                target_loss_weight,
                adversarial_weight,
                classification_weight,
                learning_rate,
                batch_size,
                iterations,
                optimizer,
            };
            let source_shape = read_shape(&mut r, "source shape")?;
            let target_shape = read_shape(&mut r, "target shape")?;
            let class_count = r.usize("class count")?;
            let model = DaModel {
                source_gen: read_network(&mut r, "source_gen")?,
                target_gen: read_network(&mut r, "target_gen")?,
                shared_gen: read_network(&mut r, "shared_gen")?,
                discriminator: read_network(&mut r, "discriminator")?,
                classifier: read_network(&mut r, "classifier")?,
                source_shape,
                target_shape,
                class_count,
            };
            model
                .validate_wiring()
                .map_err(|source| CheckpointError::Invalid {
                    path: path.display().to_string(),
                    source,
                })?;
            Checkpoint::DomainAdaptation { model, hyper, seed }
        }
        KIND_VANILLA => {
            let learning_rate = r.f64("learning rate")?;
            let epochs = r.usize("epochs")?;
            let batch_size = r.usize("batch size")?;
            let input_shape = read_shape(&mut r, "input shape")?;
            let class_count = r.usize("class count")?;
            let net = read_network(&mut r, "network")?;
            let out = net
                .output_shape(&input_shape)
                .map_err(|source| CheckpointError::Invalid {
                    path: path.display().to_string(),
                    source: TrainError::Tensor(source),
                })?;
            if out != [class_count] {
                return Err(r.fail(
                    bytes.len(),
                    format!(
                        "network maps {input_shape:?} to {out:?}, expected [{class_count}]"
                    ),
                ));
            }
            let model = BaselineModel {
                net,
                input_shape,
                class_count,
            };
            Checkpoint::Vanilla {
                model,
                learning_rate,
                epochs,
                batch_size,
                seed,
            }
        }
        other => return Err(r.fail(kind_at, format!("unknown model kind {other}"))),
    };
    if r.offset != bytes.len() {
        return Err(r.fail(
            r.offset,
            format!("{} trailing bytes after checkpoint", bytes.len() - r.offset),
        ));
    }
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::build_desk_networks;
    use crate::baseline::build_vanilla;
    use crate::rng::seed_rng;
    use proptest::prelude::*;

    fn network_bits(net: &Network) -> Vec<u64> {
        net.layers
            .iter()
            .flat_map(|l| l.params())
            .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
            .collect()
    }

    fn da_bits(model: &DaModel) -> Vec<u64> {
        [
            &model.source_gen,
            &model.target_gen,
            &model.shared_gen,
            &model.discriminator,
            &model.classifier,
        ]
        .into_iter()
        .flat_map(network_bits)
        .collect()
    }

    fn desk_checkpoint() -> Checkpoint {
        let mut rng = seed_rng(11);
        let model = build_desk_networks([12, 12, 3], [10, 10, 3], 4, &mut rng).unwrap();
        let mut hyper = HyperParams::desk();
        hyper.optimizer = OptimizerKind::Sgd;
        hyper.target_loss_weight = 0.35;
        Checkpoint::DomainAdaptation {
            model,
            hyper,
            seed: 0xDEAD_BEEF_0123,
        }
    }

    #[test]
    fn da_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let saved = desk_checkpoint();
        save_checkpoint(&saved, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        let (Checkpoint::DomainAdaptation { model: a, hyper: ha, seed: sa },
             Checkpoint::DomainAdaptation { model: b, hyper: hb, seed: sb }) = (&saved, &loaded)
        else {
            panic!("kind changed across round trip");
        };
        assert_eq!(da_bits(a), da_bits(b));
        assert_eq!(a.source_shape, b.source_shape);
        assert_eq!(a.target_shape, b.target_shape);
        assert_eq!(a.class_count, b.class_count);
        assert_eq!(ha, hb);
        assert_eq!(sa, sb);
        // PartialEq over f64 params is fine here: bit equality was already
        // established above, and the structural comparison covers layer kinds.
        assert_eq!(saved, loaded);
    }

    #[test]
    fn vanilla_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vanilla.ckpt");
        let mut rng = seed_rng(5);
        let model = build_vanilla([8, 8, 3], 3, &mut rng).unwrap();
        let saved = Checkpoint::Vanilla {
            model,
            learning_rate: 1e-3,
            epochs: 60,
            batch_size: 32,
            seed: 42,
        };
        save_checkpoint(&saved, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let (Checkpoint::Vanilla { model: a, .. }, Checkpoint::Vanilla { model: b, .. }) =
            (&saved, &loaded)
        else {
            panic!("kind changed across round trip");
        };
        assert_eq!(network_bits(&a.net), network_bits(&b.net));
        assert_eq!(saved, loaded);
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let repath = dir.path().join("b.ckpt");
        let saved = desk_checkpoint();
        save_checkpoint(&saved, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        save_checkpoint(&loaded, &repath).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&repath).unwrap());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let mut bytes = encode_checkpoint(&desk_checkpoint());
        bytes[0] = b'X';
        fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "got: {err}");
    }

    #[test]
    fn rejects_truncation_anywhere() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.ckpt");
        let bytes = encode_checkpoint(&desk_checkpoint());
        // Cutting the file at several depths must always fail cleanly, never
        // panic: mid-header, mid-name, mid-parameter block, one byte short.
        for cut in [3, 9, 60, bytes.len() / 2, bytes.len() - 1] {
            fs::write(&path, &bytes[..cut]).unwrap();
            let err = load_checkpoint(&path).unwrap_err();
            assert!(
                err.to_string().contains("truncated"),
                "cut at {cut}: {err}"
            );
        }
    }

    #[test]
    fn rejects_trailing_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("long.ckpt");
        let mut bytes = encode_checkpoint(&desk_checkpoint());
        bytes.extend_from_slice(&[0, 1, 2]);
        fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("trailing"), "got: {err}");
    }

    #[test]
    fn rejects_renamed_network_section() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("renamed.ckpt");
        let mut bytes = encode_checkpoint(&desk_checkpoint());
        let needle = b"shared_gen";
        let pos = bytes
            .windows(needle.len())
            .position(|w| w == needle)
            .expect("network name present in container");
        bytes[pos] = b'X';
        fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(
            err.to_string().contains("expected network \"shared_gen\""),
            "got: {err}"
        );
    }

    #[test]
    fn rejects_unknown_kind_and_layer_tag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kind.ckpt");
        let bytes = encode_checkpoint(&desk_checkpoint());

        let mut bad_kind = bytes.clone();
        bad_kind[4] = 9;
        fs::write(&path, &bad_kind).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("unknown model kind 9"), "got: {err}");

        // The first layer of source_gen sits right after its name section;
        // locate the name and stomp the tag byte that follows the layer count.
        let mut bad_tag = bytes;
        let needle = b"source_gen";
        let pos = bad_tag
            .windows(needle.len())
            .position(|w| w == needle)
            .unwrap();
        let tag_at = pos + needle.len() + 4;
        bad_tag[tag_at] = 77;
        fs::write(&path, &bad_tag).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("unknown layer tag 77"), "got: {err}");
    }

    #[test]
    fn load_validates_wiring() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("miswired.ckpt");
        let mut rng = seed_rng(3);
        let mut model = build_desk_networks([12, 12, 3], [10, 10, 3], 4, &mut rng).unwrap();
        // Give the classifier one head too many; the container accepts it
        // (save is faithful to its input) but load must refuse it.
        let last = model.classifier.layers.len() - 2;
        model.classifier.layers[last] = Layer::Dense(Dense::glorot(24, 5, &mut rng));
        let saved = Checkpoint::DomainAdaptation {
            model,
            hyper: HyperParams::desk(),
            seed: 1,
        };
        save_checkpoint(&saved, &path).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, CheckpointError::Invalid { .. }), "got: {err}");
    }

    #[test]
    fn missing_file_reports_io_error() {
        let err = load_checkpoint(Path::new("/nonexistent/nope.ckpt")).unwrap_err();
        assert!(matches!(err, CheckpointError::Io(_)));
    }

    proptest! {
        // Raw-bit round trip: any f64 bit pattern written as a parameter
        // (including NaN payloads, infinities, subnormals, signed zero)
        // survives save/load untouched.
        #[test]
        fn arbitrary_f64_bits_survive_round_trip(
            bits in prop::collection::vec(prop::num::u64::ANY, 1..40),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("bits.ckpt");
            let n = bits.len();
            let data: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).collect();
            let net = Network {
                layers: vec![Layer::Dense(Dense {
                    weights: Tensor::from_vec(&[1, n], data).unwrap(),
                    bias: Tensor::zeros(&[1]),
                })],
            };
            let saved = Checkpoint::Vanilla {
                model: BaselineModel { net, input_shape: [1, n, 1], class_count: 1 },
                learning_rate: 0.1,
                epochs: 1,
                batch_size: 1,
                seed: 7,
            };
            save_checkpoint(&saved, &path).unwrap();
            let loaded = load_checkpoint(&path).unwrap();
            let Checkpoint::Vanilla { model, .. } = loaded else { panic!() };
            let got: Vec<u64> =
                model.net.layers[0].params()[0].data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, bits);
        }
    }
}
