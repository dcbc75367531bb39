//! `daforge check-grad`: run the finite-difference gradient checker over a
//! menagerie of small networks covering every layer kind, and report the
//! worst relative error per network.

use anyhow::{bail, Result};
use daforge_core::gradcheck::check_gradients;
use daforge_core::layers::{Conv2D, ConvTranspose2D, Dense, Layer, MaxPool2D, Reshape, Upsample2D};
use daforge_core::network::Network;
use daforge_core::rng::{stream_rng, Stream};
use daforge_core::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, clap::Args)]
pub struct CheckGradArgs {
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Maximum tolerated relative error per coordinate.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

fn random_input(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor::from_vec(shape, data).expect("shape and data agree")
}

fn menagerie(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Network, Vec<usize>)> {
    vec![
        (
            "conv-sigmoid-dense",
            Network::new(vec![
                Layer::Conv2D(Conv2D::glorot(3, 4, 3, rng)),
                Layer::Sigmoid,
                Layer::Dense(Dense::glorot(64, 5, rng)),
            ]),
            vec![6, 6, 3],
        ),
        (
            "conv-transpose",
            Network::new(vec![
                Layer::ConvTranspose2D(ConvTranspose2D::glorot(2, 3, 3, rng)),
                Layer::Sigmoid,
                Layer::Dense(Dense::glorot(108, 4, rng)),
            ]),
            vec![4, 4, 2],
        ),
        (
            "max-pool",
            Network::new(vec![
                Layer::Conv2D(Conv2D::glorot(1, 2, 3, rng)),
                Layer::MaxPool2D(MaxPool2D { size: 2 }),
                Layer::Dense(Dense::glorot(8, 3, rng)),
            ]),
            vec![7, 7, 1],
        ),
        (
            "upsample",
            Network::new(vec![
                Layer::Upsample2D(Upsample2D { factor: 2 }),
                Layer::Conv2D(Conv2D::glorot(1, 2, 3, rng)),
                Layer::Sigmoid,
                Layer::Dense(Dense::glorot(128, 2, rng)),
            ]),
            vec![5, 5, 1],
        ),
        (
            "relu-stack",
            Network::new(vec![
                Layer::Conv2D(Conv2D::glorot(2, 3, 3, rng)),
                Layer::ReLU,
                Layer::Dense(Dense::glorot(48, 3, rng)),
            ]),
            vec![6, 6, 2],
        ),
        (
            "softmax-head",
            Network::new(vec![
                Layer::Dense(Dense::glorot(12, 8, rng)),
                Layer::Sigmoid,
                Layer::Dense(Dense::glorot(8, 4, rng)),
                Layer::Softmax,
            ]),
            vec![12],
        ),
        (
            "reshape",
            Network::new(vec![
                Layer::Reshape(Reshape {
                    target: vec![4, 4, 1],
                }),
                Layer::Conv2D(Conv2D::glorot(1, 2, 3, rng)),
                Layer::Sigmoid,
                Layer::Dense(Dense::glorot(8, 3, rng)),
            ]),
            vec![16],
        ),
    ]
}

pub fn run(args: &CheckGradArgs, seed: Option<u64>) -> Result<()> {
    let mut rng = stream_rng(seed.unwrap_or(0), Stream::Init);
    // Half the squared norm of the output: smooth everywhere, nonzero
    // gradient almost surely, and its derivative is just the output.
    let loss = |out: &Tensor| -> (f64, Tensor) {
        let value = out.data().iter().map(|v| 0.5 * v * v).sum();
        (value, out.clone())
    };

    let mut failed = Vec::new();
    for (name, net, shape) in menagerie(&mut rng) {
        let input = random_input(&shape, &mut rng);
        let report = check_gradients(&net, &input, &loss, args.epsilon, args.tolerance)?;
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        println!(
            "{name}: checked {} coordinates ({} skipped at kinks), max rel error {:.3e} -> {verdict}",
            report.checked, report.skipped, report.max_rel_error
        );
        if !report.passed() {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        bail!("gradient check failed for: {}", failed.join(", "));
    }
    println!("all gradients match finite differences");
    Ok(())
}
