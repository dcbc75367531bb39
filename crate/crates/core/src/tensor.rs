//! Dense row-major tensors, the universal value flowing through layers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {actual} does not match shape {shape:?} ({expected} elements)")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("layer {index} ({kind}): expected input {expected}, got {actual}")]
    ShapeMismatch {
        index: usize,
        kind: &'static str,
        expected: String,
        actual: String,
    },
    #[error("layer {index} ({kind}): spatial extent {extent} cannot fit a {kernel}x{kernel} kernel")]
    GeometryUnderflow {
        index: usize,
        kind: &'static str,
        extent: usize,
        kernel: usize,
    },
    #[error("output gradient shape {grad:?} does not match output shape {output:?}")]
    GradShape { grad: Vec<usize>, output: Vec<usize> },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
}

impl TensorError {
    /// Re-tag a layer-level error with its position in the network.
    pub(crate) fn at(self, layer_index: usize) -> Self {
        match self {
            TensorError::ShapeMismatch {
                kind,
                expected,
                actual,
                ..
            } => TensorError::ShapeMismatch {
                index: layer_index,
                kind,
                expected,
                actual,
            },
            TensorError::GeometryUnderflow {
                kind,
                extent,
                kernel,
                ..
            } => TensorError::GeometryUnderflow {
                index: layer_index,
                kind,
                extent,
                kernel,
            },
            other => other,
        }
    }
}

/// Dense n-dimensional array of `f64` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                shape: shape.to_vec(),
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Rank-1 tensor from a slice.
    pub fn vector(values: &[f64]) -> Self {
        Tensor {
            shape: vec![values.len()],
            data: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same data, new shape. Element counts must agree.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Self, TensorError> {
        Tensor::from_vec(shape, self.data.clone())
    }

    /// Flat offset of `[y, x, c]` in an `[H, W, C]` tensor.
    #[inline]
    pub fn idx3(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.shape[1] + x) * self.shape[2] + c
    }

    #[inline]
    pub fn at3(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.idx3(y, x, c)]
    }

    #[inline]
    pub fn set3(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.idx3(y, x, c);
        self.data[i] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `self += other`. Shapes must match.
    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Squared L2 distance to another tensor of the same shape.
    pub fn sq_dist(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}
