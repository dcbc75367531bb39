//! Parameter updates. Two modes: Adam with bias correction (the default,
//! and what the training loops use), and plain SGD for when the literal
//! delta-rule updates are wanted.

use crate::network::{Network, NetworkGrads};
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates for every parameter tensor of one network,
/// plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Vec<Tensor>>,
    pub v: Vec<Vec<Tensor>>,
    pub t: u64,
}

impl AdamState {
    pub fn for_network(net: &Network) -> Self {
        let zeros: Vec<Vec<Tensor>> = net
            .layers
            .iter()
            .map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam step over every parameter of `net`.
pub fn adam_step(net: &mut Network, grads: &NetworkGrads, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (li, layer) in net.layers.iter_mut().enumerate() {
        for (pi, param) in layer.params_mut().into_iter().enumerate() {
            let g = grads.params[li][pi].data();
            let m = state.m[li][pi].data_mut();
            let v = state.v[li][pi].data_mut();
            let p = param.data_mut();
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Plain gradient descent: `p -= lr * g`.
pub fn sgd_step(net: &mut Network, grads: &NetworkGrads, lr: f64) {
    for (li, layer) in net.layers.iter_mut().enumerate() {
        for (pi, param) in layer.params_mut().into_iter().enumerate() {
            let g = grads.params[li][pi].data();
            let p = param.data_mut();
            for i in 0..p.len() {
                p[i] -= lr * g[i];
            }
        }
    }
}

/// Which update rule a training loop applies.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd,
}

impl Optimizer {
    pub fn adam_for(net: &Network) -> Self {
        Optimizer::Adam(AdamState::for_network(net))
    }

    pub fn step(&mut self, net: &mut Network, grads: &NetworkGrads, lr: f64) {
        match self {
            Optimizer::Adam(state) => adam_step(net, grads, state, lr),
            Optimizer::Sgd => sgd_step(net, grads, lr),
        }
    }
}

/// Optimizer kind selector used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn build(self, net: &Network) -> Optimizer {
        match self {
            OptimizerKind::Adam => Optimizer::adam_for(net),
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(format!("unknown optimizer {other:?} (expected adam or sgd)")),
        }
    }
}
