//! A network is an ordered stack of layers. The forward pass records every
//! intermediate activation into a [`ForwardTrace`]; the backward pass walks
//! the trace in reverse and accumulates per-layer parameter gradients plus
//! the gradient at the network input (needed when networks are chained, as
//! the shared generator's input gradient must flow into the private ones).

use crate::layers::Layer;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Activations captured during a forward pass. `activations[0]` is the
/// input itself and `activations[i + 1]` is the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub activations: Vec<Tensor>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds the input at least")
    }

    pub fn input(&self) -> &Tensor {
        &self.activations[0]
    }
}

/// Gradients from one backward pass: `params[i]` lines up with
/// `layers[i].params()`, and `input` is dL/d(network input).
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub params: Vec<Vec<Tensor>>,
    pub input: Tensor,
}

impl NetworkGrads {
    /// Elementwise sum; shapes must agree layer by layer.
    pub fn add(&mut self, other: &NetworkGrads) {
        for (mine, theirs) in self.params.iter_mut().zip(&other.params) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.add_assign(b);
            }
        }
        self.input.add_assign(&other.input);
    }

    pub fn scale(&mut self, k: f64) {
        for layer in &mut self.params {
            for g in layer.iter_mut() {
                g.scale(k);
            }
        }
        self.input.scale(k);
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Network { layers }
    }

    /// Shape the network would produce for `input`, checking every layer.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, TensorError> {
        let mut shape = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.output_shape(&shape).map_err(|e| e.at(i))?;
        }
        Ok(shape)
    }

    pub fn forward(&self, input: &Tensor) -> Result<ForwardTrace, TensorError> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .forward(activations.last().expect("non-empty"))
                .map_err(|e| e.at(i))?;
            activations.push(next);
        }
        Ok(ForwardTrace { activations })
    }

    /// Convenience when only the output matters.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor, TensorError> {
        let mut trace = self.forward(input)?;
        Ok(trace.activations.pop().expect("non-empty activations"))
    }

    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_output: &Tensor,
    ) -> Result<NetworkGrads, TensorError> {
        let n = self.layers.len();
        assert_eq!(
            trace.activations.len(),
            n + 1,
            "trace does not match network depth"
        );
        let mut params: Vec<Vec<Tensor>> = vec![Vec::new(); n];
        let mut grad = grad_output.clone();
        for i in (0..n).rev() {
            let (p, g_in) = self.layers[i]
                .backward(&trace.activations[i], &trace.activations[i + 1], &grad)
                .map_err(|e| e.at(i))?;
            params[i] = p;
            grad = g_in;
        }
        Ok(NetworkGrads {
            params,
            input: grad,
        })
    }

    /// Zero-filled gradient holder matching this network's parameters.
    pub fn zero_grads(&self, input_shape: &[usize]) -> NetworkGrads {
        NetworkGrads {
            params: self
                .layers
                .iter()
                .map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape())).collect())
                .collect(),
            input: Tensor::zeros(input_shape),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.numel())
            .sum()
    }
}
