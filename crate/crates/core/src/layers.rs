//! The fixed layer vocabulary: convolutions (direct and transposed), 2x2
//! max-pooling, nearest-neighbor upsampling, dense layers, ReLU, sigmoid,
//! softmax and reshape. Every layer knows how to run forward, infer its
//! output shape, and push a gradient back to its parameters and input.
//!
//! Geometry conventions: images are `[H, W, C]` row-major, convolutions are
//! stride 1 with no padding (VALID), pooling floors odd extents, upsampling
//! is nearest-neighbor. Dense layers accept any input shape with the right
//! element count and flatten it row-major.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Tensor, TensorError};

/// One layer of a [`crate::network::Network`]. Parameterized kinds carry
/// their weights inline; stateless kinds carry nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2D(Conv2D),
    ConvTranspose2D(ConvTranspose2D),
    MaxPool2D(MaxPool2D),
    Upsample2D(Upsample2D),
    Dense(Dense),
    ReLU,
    Sigmoid,
    Softmax,
    Reshape(Reshape),
}

/// Stride-1 VALID convolution. Weights are `[filters, K, K, in_channels]`,
/// bias `[filters]`; output is `[H-K+1, W-K+1, filters]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2D {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Stride-1 transposed convolution; output grows to `[H+K-1, W+K-1, filters]`.
/// Weights are `[filters, K, K, in_channels]`, bias `[filters]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2D {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Non-overlapping max pooling; odd trailing rows/columns are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool2D {
    pub size: usize,
}

/// Nearest-neighbor upsampling by an integer factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Upsample2D {
    pub factor: usize,
}

/// Fully connected layer. Weights are `[out, in]`, bias `[out]`. The input
/// is flattened row-major, so a conv stack feeds it directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reshape {
    pub target: Vec<usize>,
}

fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_vec(shape, data).expect("glorot shape/data agree")
}

impl Conv2D {
    pub fn glorot(in_channels: usize, filters: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = kernel * kernel * in_channels;
        let fan_out = kernel * kernel * filters;
        Conv2D {
            weights: glorot(&[filters, kernel, kernel, in_channels], fan_in, fan_out, rng),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn filters(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[3]
    }
}

impl ConvTranspose2D {
    pub fn glorot(in_channels: usize, filters: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = kernel * kernel * in_channels;
        let fan_out = kernel * kernel * filters;
        ConvTranspose2D {
            weights: glorot(&[filters, kernel, kernel, in_channels], fan_in, fan_out, rng),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn filters(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[3]
    }
}

impl Dense {
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weights: glorot(&[outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }
}

/// Numerically stable softmax over the last axis: the row maximum is
/// subtracted before exponentiation, so huge logits cannot overflow.
pub fn softmax_stable(logits: &Tensor) -> Tensor {
    let row = *logits.shape().last().expect("softmax needs rank >= 1");
    let mut out = logits.clone();
    for chunk in out.data_mut().chunks_mut(row) {
        let max = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in chunk.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in chunk.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn shape_str(shape: &[usize]) -> String {
    format!("{shape:?}")
}

fn mismatch(kind: &'static str, expected: String, actual: &[usize]) -> TensorError {
    TensorError::ShapeMismatch {
        index: 0,
        kind,
        expected,
        actual: shape_str(actual),
    }
}

fn want_image(kind: &'static str, shape: &[usize], channels: usize) -> Result<(usize, usize), TensorError> {
    if shape.len() != 3 || shape[2] != channels {
        return Err(mismatch(
            kind,
            format!("[H, W, {channels}]"),
            shape,
        ));
    }
    Ok((shape[0], shape[1]))
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2D(_) => "Conv2D",
            Layer::ConvTranspose2D(_) => "ConvTranspose2D",
            Layer::MaxPool2D(_) => "MaxPool2D",
            Layer::Upsample2D(_) => "Upsample2D",
            Layer::Dense(_) => "Dense",
            Layer::ReLU => "ReLU",
            Layer::Sigmoid => "Sigmoid",
            Layer::Softmax => "Softmax",
            Layer::Reshape(_) => "Reshape",
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2D(c) => vec![&c.weights, &c.bias],
            Layer::ConvTranspose2D(c) => vec![&c.weights, &c.bias],
            Layer::Dense(d) => vec![&d.weights, &d.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2D(c) => vec![&mut c.weights, &mut c.bias],
            Layer::ConvTranspose2D(c) => vec![&mut c.weights, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
            _ => vec![],
        }
    }

    /// Output shape for a given input shape, without running anything.
    /// All the structural errors (mismatched channels, geometry underflow,
    /// wrong element counts) surface here.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, TensorError> {
        match self {
            Layer::Conv2D(c) => {
                let (h, w) = want_image("Conv2D", input, c.in_channels())?;
                let k = c.kernel();
                if h < k || w < k {
                    return Err(TensorError::GeometryUnderflow {
                        index: 0,
                        kind: "Conv2D",
                        extent: h.min(w),
                        kernel: k,
                    });
                }
                Ok(vec![h - k + 1, w - k + 1, c.filters()])
            }
            Layer::ConvTranspose2D(c) => {
                let (h, w) = want_image("ConvTranspose2D", input, c.in_channels())?;
                let k = c.kernel();
                Ok(vec![h + k - 1, w + k - 1, c.filters()])
            }
            Layer::MaxPool2D(p) => {
                if input.len() != 3 {
                    return Err(mismatch("MaxPool2D", "[H, W, C]".into(), input));
                }
                let (oh, ow) = (input[0] / p.size, input[1] / p.size);
                if oh == 0 || ow == 0 {
                    return Err(TensorError::GeometryUnderflow {
                        index: 0,
                        kind: "MaxPool2D",
                        extent: input[0].min(input[1]),
                        kernel: p.size,
                    });
                }
                Ok(vec![oh, ow, input[2]])
            }
            Layer::Upsample2D(u) => {
                if input.len() != 3 {
                    return Err(mismatch("Upsample2D", "[H, W, C]".into(), input));
                }
                Ok(vec![input[0] * u.factor, input[1] * u.factor, input[2]])
            }
            Layer::Dense(d) => {
                let n: usize = input.iter().product();
                if n != d.inputs() {
                    return Err(mismatch(
                        "Dense",
                        format!("any shape with {} elements", d.inputs()),
                        input,
                    ));
                }
                Ok(vec![d.outputs()])
            }
            Layer::ReLU | Layer::Sigmoid => Ok(input.to_vec()),
            Layer::Softmax => {
                if input.is_empty() {
                    return Err(mismatch("Softmax", "rank >= 1".into(), input));
                }
                Ok(input.to_vec())
            }
            Layer::Reshape(r) => {
                let n: usize = input.iter().product();
                let target: usize = r.target.iter().product();
                if n != target {
                    return Err(mismatch(
                        "Reshape",
                        format!("any shape with {target} elements"),
                        input,
                    ));
                }
                Ok(r.target.clone())
            }
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, TensorError> {
        let out_shape = self.output_shape(input.shape())?;
        let out = match self {
            Layer::Conv2D(c) => conv_forward(input, &c.weights, &c.bias, &out_shape),
            Layer::ConvTranspose2D(c) => convt_forward(input, &c.weights, &c.bias, &out_shape),
            Layer::MaxPool2D(p) => maxpool_forward(input, p.size, &out_shape),
            Layer::Upsample2D(u) => upsample_forward(input, u.factor, &out_shape),
            Layer::Dense(d) => dense_forward(input, &d.weights, &d.bias),
            Layer::ReLU => input.map(|v| v.max(0.0)),
            Layer::Sigmoid => input.map(|v| 1.0 / (1.0 + (-v).exp())),
            Layer::Softmax => softmax_stable(input),
            Layer::Reshape(r) => input.reshaped(&r.target)?,
        };
        Ok(out)
    }

    /// Reverse-mode step: given the layer's cached forward input/output and
    /// the gradient at the output, produce the parameter gradients (aligned
    /// with [`Layer::params`]) and the gradient at the input.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_out: &Tensor,
    ) -> Result<(Vec<Tensor>, Tensor), TensorError> {
        if grad_out.shape() != output.shape() {
            return Err(TensorError::GradShape {
                grad: grad_out.shape().to_vec(),
                output: output.shape().to_vec(),
            });
        }
        let res = match self {
            Layer::Conv2D(c) => conv_backward(input, &c.weights, grad_out),
            Layer::ConvTranspose2D(c) => convt_backward(input, &c.weights, grad_out),
            Layer::MaxPool2D(p) => (vec![], maxpool_backward(input, p.size, grad_out)),
            Layer::Upsample2D(u) => (vec![], upsample_backward(input, u.factor, grad_out)),
            Layer::Dense(d) => dense_backward(input, &d.weights, grad_out),
            Layer::ReLU => {
                let mut g = grad_out.clone();
                for (gv, &iv) in g.data_mut().iter_mut().zip(input.data()) {
                    if iv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                (vec![], g)
            }
            Layer::Sigmoid => {
                let mut g = grad_out.clone();
                for (gv, &ov) in g.data_mut().iter_mut().zip(output.data()) {
                    *gv *= ov * (1.0 - ov);
                }
                (vec![], g)
            }
            Layer::Softmax => (vec![], softmax_backward(output, grad_out)),
            Layer::Reshape(_) => (vec![], grad_out.reshaped(input.shape())?),
        };
        Ok(res)
    }
}

fn conv_forward(input: &Tensor, w: &Tensor, b: &Tensor, out_shape: &[usize]) -> Tensor {
    let (h_in, w_in, c_in) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow, f) = (out_shape[0], out_shape[1], out_shape[2]);
    let k = w.shape()[1];
    let _ = h_in;
    let mut out = Tensor::zeros(out_shape);
    let id = input.data();
    let wd = w.data();
    let bd = b.data();
    let od = out.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            let obase = (oy * ow + ox) * f;
            for fi in 0..f {
                let mut acc = bd[fi];
                for ky in 0..k {
                    let irow = ((oy + ky) * w_in + ox) * c_in;
                    let wrow = ((fi * k + ky) * k) * c_in;
                    for kx in 0..k {
                        let ib = irow + kx * c_in;
                        let wb = wrow + kx * c_in;
                        for ci in 0..c_in {
                            acc += id[ib + ci] * wd[wb + ci];
                        }
                    }
                }
                od[obase + fi] = acc;
            }
        }
    }
    out
}

fn conv_backward(input: &Tensor, w: &Tensor, grad_out: &Tensor) -> (Vec<Tensor>, Tensor) {
    let (w_in, c_in) = (input.shape()[1], input.shape()[2]);
    let (oh, ow, f) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let k = w.shape()[1];
    let mut d_w = Tensor::zeros(w.shape());
    let mut d_b = Tensor::zeros(&[f]);
    let mut d_in = Tensor::zeros(input.shape());
    let id = input.data();
    let wd = w.data();
    let gd = grad_out.data();
    {
        let dwd = d_w.data_mut();
        let dind = d_in.data_mut();
        let dbd = d_b.data_mut();
        for oy in 0..oh {
            for ox in 0..ow {
                let gbase = (oy * ow + ox) * f;
                for fi in 0..f {
                    let g = gd[gbase + fi];
                    if g == 0.0 {
                        continue;
                    }
                    dbd[fi] += g;
                    for ky in 0..k {
                        let irow = ((oy + ky) * w_in + ox) * c_in;
                        let wrow = ((fi * k + ky) * k) * c_in;
                        for kx in 0..k {
                            let ib = irow + kx * c_in;
                            let wb = wrow + kx * c_in;
                            for ci in 0..c_in {
                                dwd[wb + ci] += id[ib + ci] * g;
                                dind[ib + ci] += wd[wb + ci] * g;
                            }
                        }
                    }
                }
            }
        }
    }
    (vec![d_w, d_b], d_in)
}

fn convt_forward(input: &Tensor, w: &Tensor, b: &Tensor, out_shape: &[usize]) -> Tensor {
    let (h_in, w_in, c_in) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (_, ow, f) = (out_shape[0], out_shape[1], out_shape[2]);
    let k = w.shape()[1];
    let mut out = Tensor::zeros(out_shape);
    let id = input.data();
    let wd = w.data();
    let od = out.data_mut();
    // Every input pixel scatters a KxK stamp of each filter.
    for y in 0..h_in {
        for x in 0..w_in {
            let ibase = (y * w_in + x) * c_in;
            for ky in 0..k {
                for kx in 0..k {
                    let obase = ((y + ky) * ow + (x + kx)) * f;
                    for fi in 0..f {
                        let wrow = ((fi * k + ky) * k + kx) * c_in;
                        let mut acc = 0.0;
                        for ci in 0..c_in {
                            acc += id[ibase + ci] * wd[wrow + ci];
                        }
                        od[obase + fi] += acc;
                    }
                }
            }
        }
    }
    for v in od.chunks_mut(f) {
        for (fi, o) in v.iter_mut().enumerate() {
            *o += b.data()[fi];
        }
    }
    out
}

fn convt_backward(input: &Tensor, w: &Tensor, grad_out: &Tensor) -> (Vec<Tensor>, Tensor) {
    let (h_in, w_in, c_in) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (_, ow, f) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let k = w.shape()[1];
    let mut d_w = Tensor::zeros(w.shape());
    let mut d_b = Tensor::zeros(&[f]);
    let mut d_in = Tensor::zeros(input.shape());
    let id = input.data();
    let wd = w.data();
    let gd = grad_out.data();
    for (i, &g) in gd.iter().enumerate() {
        d_b.data_mut()[i % f] += g;
    }
    {
        let dwd = d_w.data_mut();
        let dind = d_in.data_mut();
        for y in 0..h_in {
            for x in 0..w_in {
                let ibase = (y * w_in + x) * c_in;
                for ky in 0..k {
                    for kx in 0..k {
                        let gbase = ((y + ky) * ow + (x + kx)) * f;
                        for fi in 0..f {
                            let g = gd[gbase + fi];
                            if g == 0.0 {
                                continue;
                            }
                            let wrow = ((fi * k + ky) * k + kx) * c_in;
                            for ci in 0..c_in {
                                dwd[wrow + ci] += id[ibase + ci] * g;
                                dind[ibase + ci] += wd[wrow + ci] * g;
                            }
                        }
                    }
                }
            }
        }
    }
    (vec![d_w, d_b], d_in)
}

fn maxpool_forward(input: &Tensor, size: usize, out_shape: &[usize]) -> Tensor {
    let (oh, ow, c) = (out_shape[0], out_shape[1], out_shape[2]);
    let mut out = Tensor::zeros(out_shape);
    for oy in 0..oh {
        for ox in 0..ow {
            for ci in 0..c {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..size {
                    for kx in 0..size {
                        let v = input.at3(oy * size + ky, ox * size + kx, ci);
                        if v > best {
                            best = v;
                        }
                    }
                }
                out.set3(oy, ox, ci, best);
            }
        }
    }
    out
}

fn maxpool_backward(input: &Tensor, size: usize, grad_out: &Tensor) -> Tensor {
    let (oh, ow, c) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let mut d_in = Tensor::zeros(input.shape());
    for oy in 0..oh {
        for ox in 0..ow {
            for ci in 0..c {
                // Ties route to the first maximum in scan order, matching
                // the forward pass deterministically.
                let mut best = f64::NEG_INFINITY;
                let mut best_yx = (0, 0);
                for ky in 0..size {
                    for kx in 0..size {
                        let (y, x) = (oy * size + ky, ox * size + kx);
                        let v = input.at3(y, x, ci);
                        if v > best {
                            best = v;
                            best_yx = (y, x);
                        }
                    }
                }
                let g = grad_out.at3(oy, ox, ci);
                let i = d_in.idx3(best_yx.0, best_yx.1, ci);
                d_in.data_mut()[i] += g;
            }
        }
    }
    d_in
}

fn upsample_forward(input: &Tensor, factor: usize, out_shape: &[usize]) -> Tensor {
    let (oh, ow, c) = (out_shape[0], out_shape[1], out_shape[2]);
    let mut out = Tensor::zeros(out_shape);
    for y in 0..oh {
        for x in 0..ow {
            for ci in 0..c {
                let v = input.at3(y / factor, x / factor, ci);
                out.set3(y, x, ci, v);
            }
        }
    }
    out
}

fn upsample_backward(input: &Tensor, factor: usize, grad_out: &Tensor) -> Tensor {
    let (oh, ow, c) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let mut d_in = Tensor::zeros(input.shape());
    for y in 0..oh {
        for x in 0..ow {
            for ci in 0..c {
                let i = d_in.idx3(y / factor, x / factor, ci);
                d_in.data_mut()[i] += grad_out.at3(y, x, ci);
            }
        }
    }
    d_in
}

fn dense_forward(input: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (out_n, in_n) = (w.shape()[0], w.shape()[1]);
    let mut out = Tensor::zeros(&[out_n]);
    let id = input.data();
    let wd = w.data();
    for o in 0..out_n {
        let row = &wd[o * in_n..(o + 1) * in_n];
        let mut acc = b.data()[o];
        for (x, wv) in id.iter().zip(row) {
            acc += x * wv;
        }
        out.data_mut()[o] = acc;
    }
    out
}

fn dense_backward(input: &Tensor, w: &Tensor, grad_out: &Tensor) -> (Vec<Tensor>, Tensor) {
    let (out_n, in_n) = (w.shape()[0], w.shape()[1]);
    let mut d_w = Tensor::zeros(w.shape());
    let d_b = grad_out.reshaped(&[out_n]).expect("dense grad is [out]");
    let mut d_in = Tensor::zeros(input.shape());
    let id = input.data();
    let wd = w.data();
    let gd = grad_out.data();
    {
        let dwd = d_w.data_mut();
        let dind = d_in.data_mut();
        for o in 0..out_n {
            let g = gd[o];
            if g == 0.0 {
                continue;
            }
            let base = o * in_n;
            for i in 0..in_n {
                dwd[base + i] += g * id[i];
                dind[i] += g * wd[base + i];
            }
        }
    }
    (vec![d_w, d_b], d_in)
}

fn softmax_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let row = *output.shape().last().expect("softmax rank >= 1");
    let mut d_in = Tensor::zeros(output.shape());
    for ((schunk, gchunk), dchunk) in output
        .data()
        .chunks(row)
        .zip(grad_out.data().chunks(row))
        .zip(d_in.data_mut().chunks_mut(row))
    {
        let dot: f64 = schunk.iter().zip(gchunk).map(|(s, g)| s * g).sum();
        for ((d, &s), &g) in dchunk.iter_mut().zip(schunk).zip(gchunk) {
            *d = s * (g - dot);
        }
    }
    d_in
}
