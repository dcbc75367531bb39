//! Two-stage pipeline for wafer-map defect classification on scarce,
//! imbalanced data: autoencoder-based synthetic augmentation of the target
//! training set, followed by heterogeneous adversarial domain adaptation
//! with per-domain private generators, a shared generator, a domain
//! discriminator and a label classifier.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`], [`layers`], [`network`], [`optim`], [`gradcheck`] — a
//!   minimal differentiable-layer engine (dense tensors, the fixed layer
//!   vocabulary, reverse-mode gradients, Adam, a finite-difference checker).
//! * [`data`] — wafer-map datasets, the WMD on-disk format, one-hot
//!   encoding, stratified splits, two-domain mini-batching and a synthetic
//!   dataset generator for desk-scale experiments.
//! * [`augment`] — undercomplete convolutional autoencoder and
//!   latent-noise minority-class augmentation.
//! * [`adversarial`] — the five-network model, its three losses and the
//!   alternating update schedule.
//! * [`baseline`] — the vanilla CNN classifier used as a comparison floor.
//! * [`metrics`] — confusion-matrix accounting, balanced accuracy, micro
//!   precision, per-seed aggregation and wall-clock timing.
//! * [`checkpoint`] — bit-exact binary model checkpoints.
//! * [`experiment`] — single training/evaluation legs and the grid runner
//!   shared by the CLI and the test suites.

pub mod adversarial;
pub mod augment;
pub mod baseline;
pub mod checkpoint;
pub mod data;
pub mod experiment;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use tensor::{Tensor, TensorError};
