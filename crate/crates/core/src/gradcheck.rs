//! Central finite-difference verification of the backward pass.
//!
//! For every parameter element (and every input element) the checker
//! perturbs by +/- epsilon, re-runs the forward pass plus a caller-supplied
//! loss, and compares the numeric slope against the analytic gradient.
//!
//! ReLU and max-pooling are piecewise linear: if a perturbation flips a
//! ReLU sign or moves a pooling argmax, the two-sided difference straddles
//! a kink and says nothing about the derivative. The checker detects this
//! by comparing routing signatures of the two perturbed traces and skips
//! such coordinates instead of reporting phantom failures.

use crate::layers::Layer;
use crate::network::{ForwardTrace, Network};
use crate::tensor::{Tensor, TensorError};

/// A loss evaluated on the network output: returns the scalar value and the
/// gradient with respect to the output.
pub type LossFn<'a> = &'a dyn Fn(&Tensor) -> (f64, Tensor);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Param { layer: usize, param: usize, index: usize },
    Input { index: usize },
}

#[derive(Debug, Clone)]
pub struct GradFault {
    pub location: Location,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates skipped because the probe crossed a ReLU/pool kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub failures: Vec<GradFault>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

/// Relative error with the denominator floored, so near-zero gradients are
/// effectively compared absolutely.
fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

/// Routing decisions of one forward pass: ReLU sign bits and pooling argmax
/// positions. Two probes are only comparable if these agree.
fn routing_signature(net: &Network, trace: &ForwardTrace) -> Vec<u64> {
    let mut sig = Vec::new();
    for (i, layer) in net.layers.iter().enumerate() {
        match layer {
            Layer::ReLU => {
                for &v in trace.activations[i].data() {
                    sig.push((v > 0.0) as u64);
                }
            }
            Layer::MaxPool2D(p) => {
                let input = &trace.activations[i];
                let out = &trace.activations[i + 1];
                let (oh, ow, c) = (out.shape()[0], out.shape()[1], out.shape()[2]);
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ci in 0..c {
                            let mut best = f64::NEG_INFINITY;
                            let mut arg = 0u64;
                            for ky in 0..p.size {
                                for kx in 0..p.size {
                                    let v = input.at3(oy * p.size + ky, ox * p.size + kx, ci);
                                    if v > best {
                                        best = v;
                                        arg = (ky * p.size + kx) as u64;
                                    }
                                }
                            }
                            sig.push(arg);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    sig
}

fn probe(
    net: &Network,
    input: &Tensor,
    loss: LossFn,
) -> Result<(f64, Vec<u64>), TensorError> {
    let trace = net.forward(input)?;
    let (value, _) = loss(trace.output());
    let sig = routing_signature(net, &trace);
    Ok((value, sig))
}

/// Check every parameter gradient and every input gradient of `net` under
/// `loss` against central finite differences.
pub fn check_gradients(
    net: &Network,
    input: &Tensor,
    loss: LossFn,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport, TensorError> {
    let trace = net.forward(input)?;
    let (_, grad_out) = loss(trace.output());
    let analytic = net.backward(&trace, &grad_out)?;

    let mut report = GradCheckReport {
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
        failures: Vec::new(),
    };

    let mut work = net.clone();
    for li in 0..net.layers.len() {
        let n_params = net.layers[li].params().len();
        for pi in 0..n_params {
            let n = net.layers[li].params()[pi].numel();
            for idx in 0..n {
                let original = work.layers[li].params()[pi].data()[idx];
                work.layers[li].params_mut()[pi].data_mut()[idx] = original + epsilon;
                let (f_plus, sig_plus) = probe(&work, input, loss)?;
                work.layers[li].params_mut()[pi].data_mut()[idx] = original - epsilon;
                let (f_minus, sig_minus) = probe(&work, input, loss)?;
                work.layers[li].params_mut()[pi].data_mut()[idx] = original;

                let location = Location::Param { layer: li, param: pi, index: idx };
                let a = analytic.params[li][pi].data()[idx];
                record(
                    &mut report,
                    location,
                    a,
                    f_plus,
                    f_minus,
                    sig_plus == sig_minus,
                    epsilon,
                    tolerance,
                );
            }
        }
    }

    let mut moved = input.clone();
    for idx in 0..input.numel() {
        let original = moved.data()[idx];
        moved.data_mut()[idx] = original + epsilon;
        let (f_plus, sig_plus) = probe(net, &moved, loss)?;
        moved.data_mut()[idx] = original - epsilon;
        let (f_minus, sig_minus) = probe(net, &moved, loss)?;
        moved.data_mut()[idx] = original;

        let a = analytic.input.data()[idx];
        record(
            &mut report,
            Location::Input { index: idx },
            a,
            f_plus,
            f_minus,
            sig_plus == sig_minus,
            epsilon,
            tolerance,
        );
    }

    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn record(
    report: &mut GradCheckReport,
    location: Location,
    analytic: f64,
    f_plus: f64,
    f_minus: f64,
    routing_stable: bool,
    epsilon: f64,
    tolerance: f64,
) {
    if !routing_stable {
        report.skipped += 1;
        return;
    }
    let numeric = (f_plus - f_minus) / (2.0 * epsilon);
    let err = rel_error(analytic, numeric);
    report.checked += 1;
    if err > report.max_rel_error {
        report.max_rel_error = err;
    }
    if err > tolerance {
        report.failures.push(GradFault {
            location,
            analytic,
            numeric,
            rel_error: err,
        });
    }
}
