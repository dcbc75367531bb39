//! Flat key=value config files.
//!
//! One `key = value` pair per line; blank lines and `#` comments are
//! ignored. The same format serves two roles with different key sets: the
//! global `--config` file (training and grid settings) and the `--spec`
//! file consumed by `synth` (synthetic dataset geometry). Unknown keys are
//! rejected so typos fail loudly. Command-line flags always win over file
//! values.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use daforge_core::adversarial::HyperParams;
use daforge_core::data::SynthSpec;
use daforge_core::experiment::{Architecture, Method, RunConfig};
use daforge_core::optim::OptimizerKind;

/// Keys accepted in a `--config` file.
const CONFIG_KEYS: &[&str] = &[
    "seed",
    "deterministic",
    "iterations",
    "batch_size",
    "learning_rate",
    "optimizer",
    "target_loss_weight",
    "adversarial_weight",
    "classification_weight",
    "architecture",
    "vanilla_epochs",
    "vanilla_batch_size",
    "vanilla_learning_rate",
    "ae_epochs",
    "ae_batch_size",
    "ae_learning_rate",
    "noise_std",
    "train_fraction",
    "sizes",
    "repeats",
    "methods",
];

/// Keys accepted in a `synth --spec` file.
const SPEC_KEYS: &[&str] = &[
    "source_size",
    "target_size",
    "source_per_class",
    "target_counts",
    "noise_rate",
    "seed",
];

pub struct ConfigMap {
    values: HashMap<String, String>,
}

fn parse_flat(path: &Path, allowed: &[&str]) -> Result<ConfigMap> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut values = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "{}:{}: expected key = value, got {raw:?}",
                path.display(),
                lineno + 1
            );
        };
        let key = key.trim().to_string();
        if !allowed.contains(&key.as_str()) {
            bail!(
                "{}:{}: unknown key {key:?} (known: {})",
                path.display(),
                lineno + 1,
                allowed.join(", ")
            );
        }
        if values.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("{}:{}: duplicate key {key:?}", path.display(), lineno + 1);
        }
    }
    Ok(ConfigMap { values })
}

/// Load a `--config` file, or an empty map when none was given.
pub fn load_config(path: Option<&Path>) -> Result<ConfigMap> {
    match path {
        Some(p) => parse_flat(p, CONFIG_KEYS),
        None => Ok(ConfigMap {
            values: HashMap::new(),
        }),
    }
}

impl ConfigMap {
    fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key} = {raw:?}: {e}"),
            },
        }
    }

    /// Flag value if present, else config value, else the default.
    fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn seed(&self, flag: Option<u64>, default: u64) -> Result<u64> {
        self.pick(flag, "seed", default)
    }

    pub fn deterministic(&self, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.get("deterministic")?.unwrap_or(false))
    }
}

/// Hyperparameter flags shared by `train` and `grid`.
#[derive(Debug, clap::Args)]
pub struct HyperFlags {
    /// Adversarial training iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Mixed-batch size per domain for adversarial training.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate for all five adversarial networks.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Weight of the target term inside the classification loss.
    #[arg(long)]
    pub target_loss_weight: Option<f64>,
    /// Weight of the adversarial term in the generator update.
    #[arg(long)]
    pub adversarial_weight: Option<f64>,
    /// Weight of the classification term in the generator update.
    #[arg(long)]
    pub classification_weight: Option<f64>,
    /// Network sizing: desk (compact) or paper (full-size).
    #[arg(long)]
    pub architecture: Option<String>,
}

pub fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    match s {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        other => bail!("unknown optimizer {other:?} (expected adam or sgd)"),
    }
}

pub fn parse_architecture(s: &str) -> Result<Architecture> {
    match s {
        "desk" => Ok(Architecture::Desk),
        "paper" => Ok(Architecture::Paper),
        other => bail!("unknown architecture {other:?} (expected desk or paper)"),
    }
}

impl ConfigMap {
    /// Adversarial hyperparameters: defaults, overlaid by config keys,
    /// overlaid by flags.
    pub fn hyper(&self, flags: &HyperFlags, default: HyperParams) -> Result<HyperParams> {
        let hyper = HyperParams {
            target_loss_weight: self.pick(
                flags.target_loss_weight,
                "target_loss_weight",
                default.target_loss_weight,
            )?,
            adversarial_weight: self.pick(
                flags.adversarial_weight,
                "adversarial_weight",
                default.adversarial_weight,
            )?,
            classification_weight: self.pick(
                flags.classification_weight,
                "classification_weight",
                default.classification_weight,
            )?,
            learning_rate: self.pick(flags.learning_rate, "learning_rate", default.learning_rate)?,
            batch_size: self.pick(flags.batch_size, "batch_size", default.batch_size)?,
            iterations: self.pick(flags.iterations, "iterations", default.iterations)?,
            optimizer: match &flags.optimizer {
                Some(s) => parse_optimizer(s)?,
                None => match self.values.get("optimizer") {
                    Some(s) => parse_optimizer(s)?,
                    None => default.optimizer,
                },
            },
        };
        hyper.validate()?;
        Ok(hyper)
    }

    pub fn architecture(&self, flag: Option<&str>) -> Result<Architecture> {
        match flag {
            Some(s) => parse_architecture(s),
            None => match self.values.get("architecture") {
                Some(s) => parse_architecture(s),
                None => Ok(Architecture::Desk),
            },
        }
    }
}

/// Vanilla-baseline flags shared by `train` and `grid`.
#[derive(Debug, clap::Args)]
pub struct VanillaFlags {
    /// Epochs for the vanilla baseline.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Batch size for the vanilla baseline.
    #[arg(long)]
    pub vanilla_batch_size: Option<usize>,
    /// Learning rate for the vanilla baseline.
    #[arg(long)]
    pub vanilla_learning_rate: Option<f64>,
}

/// Autoencoder flags shared by `augment` and `grid`.
#[derive(Debug, clap::Args)]
pub struct AeFlags {
    /// Autoencoder training epochs.
    #[arg(long)]
    pub ae_epochs: Option<usize>,
    /// Autoencoder batch size.
    #[arg(long)]
    pub ae_batch_size: Option<usize>,
    /// Autoencoder learning rate.
    #[arg(long)]
    pub ae_learning_rate: Option<f64>,
    /// Latent Gaussian noise scale for synthetic samples.
    #[arg(long)]
    pub noise_std: Option<f64>,
}

/// Autoencoder training settings resolved from flags, config and defaults.
#[derive(Debug, Clone, Copy)]
pub struct AeSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub noise_std: f64,
}

/// Baseline-training settings shared by `train` (defaults: 60 epochs,
/// batch 32) and the grid runner.
#[derive(Debug, Clone, Copy)]
pub struct VanillaSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl ConfigMap {
    pub fn vanilla(
        &self,
        flags: &VanillaFlags,
        default: VanillaSettings,
    ) -> Result<VanillaSettings> {
        Ok(VanillaSettings {
            epochs: self.pick(flags.epochs, "vanilla_epochs", default.epochs)?,
            batch_size: self.pick(
                flags.vanilla_batch_size,
                "vanilla_batch_size",
                default.batch_size,
            )?,
            learning_rate: self.pick(
                flags.vanilla_learning_rate,
                "vanilla_learning_rate",
                default.learning_rate,
            )?,
        })
    }

    pub fn ae(&self, flags: &AeFlags, default: AeSettings) -> Result<AeSettings> {
        Ok(AeSettings {
            epochs: self.pick(flags.ae_epochs, "ae_epochs", default.epochs)?,
            batch_size: self.pick(flags.ae_batch_size, "ae_batch_size", default.batch_size)?,
            learning_rate: self.pick(
                flags.ae_learning_rate,
                "ae_learning_rate",
                default.learning_rate,
            )?,
            noise_std: self.pick(flags.noise_std, "noise_std", default.noise_std)?,
        })
    }

    /// Assemble the grid runner's per-leg config from defaults, config file
    /// and flags.
    pub fn run_config(
        &self,
        hyper: &HyperFlags,
        vanilla_flags: &VanillaFlags,
        ae_flags: &AeFlags,
        train_fraction: Option<f64>,
        deterministic: bool,
    ) -> Result<RunConfig> {
        let d = RunConfig::default();
        let vanilla = self.vanilla(
            vanilla_flags,
            VanillaSettings {
                epochs: d.vanilla_epochs,
                batch_size: d.vanilla_batch_size,
                learning_rate: d.vanilla_learning_rate,
            },
        )?;
        let ae = self.ae(
            ae_flags,
            AeSettings {
                epochs: d.ae_epochs,
                batch_size: d.ae_batch_size,
                learning_rate: d.ae_learning_rate,
                noise_std: d.noise_std,
            },
        )?;
        Ok(RunConfig {
            hyper: self.hyper(hyper, d.hyper)?,
            architecture: self.architecture(hyper.architecture.as_deref())?,
            vanilla_epochs: vanilla.epochs,
            vanilla_batch_size: vanilla.batch_size,
            vanilla_learning_rate: vanilla.learning_rate,
            ae: d.ae,
            ae_epochs: ae.epochs,
            ae_batch_size: ae.batch_size,
            ae_learning_rate: ae.learning_rate,
            noise_std: ae.noise_std,
            train_fraction: self.pick(train_fraction, "train_fraction", d.train_fraction)?,
            deterministic: self.deterministic(deterministic)?,
        })
    }

    pub fn sizes(&self, flag: Option<Vec<usize>>, default: &[usize]) -> Result<Vec<usize>> {
        let sizes = match flag {
            Some(v) => v,
            None => match self.values.get("sizes") {
                Some(raw) => parse_list(raw).context("config key sizes")?,
                None => default.to_vec(),
            },
        };
        if sizes.is_empty() {
            bail!("sizes must name at least one target budget");
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            bail!("sizes must be strictly ascending, got {sizes:?}");
        }
        Ok(sizes)
    }

    pub fn repeats(&self, flag: Option<usize>, default: usize) -> Result<usize> {
        let repeats = self.pick(flag, "repeats", default)?;
        if repeats == 0 {
            bail!("repeats must be at least 1");
        }
        Ok(repeats)
    }

    pub fn methods(&self, flag: Option<Vec<String>>) -> Result<Vec<(Method, bool)>> {
        let tokens: Vec<String> = match flag {
            Some(v) => v,
            None => match self.values.get("methods") {
                Some(raw) => raw.split(',').map(|t| t.trim().to_string()).collect(),
                None => return Ok(daforge_core::experiment::all_method_rows()),
            },
        };
        let mut rows = Vec::new();
        for token in &tokens {
            rows.push(parse_method_row(token)?);
        }
        if rows.is_empty() {
            bail!("methods must name at least one row");
        }
        Ok(rows)
    }
}

/// One grid row spec: `da`, `da+aug`, `vanilla` or `vanilla+aug`.
pub fn parse_method_row(token: &str) -> Result<(Method, bool)> {
    let (name, augmented) = match token.strip_suffix("+aug") {
        Some(base) => (base, true),
        None => (token, false),
    };
    match Method::parse(name) {
        Some(method) => Ok((method, augmented)),
        None => bail!("unknown method row {token:?} (expected da, da+aug, vanilla, vanilla+aug)"),
    }
}

fn parse_list(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad list entry {t:?}"))
        })
        .collect()
}

/// Parse a `synth --spec` file over the default spec; the `--seed` flag, if
/// given, wins over the file's seed.
pub fn load_synth_spec(path: Option<&Path>, seed_flag: Option<u64>) -> Result<SynthSpec> {
    let mut spec = SynthSpec::default();
    if let Some(p) = path {
        let map = parse_flat(p, SPEC_KEYS)?;
        if let Some(v) = map.get("source_size")? {
            spec.source_size = v;
        }
        if let Some(v) = map.get("target_size")? {
            spec.target_size = v;
        }
        if let Some(v) = map.get("source_per_class")? {
            spec.source_per_class = v;
        }
        if let Some(raw) = map.values.get("target_counts") {
            spec.target_counts = parse_list(raw).context("spec key target_counts")?;
        }
        if let Some(v) = map.get("noise_rate")? {
            spec.noise_rate = v;
        }
        if let Some(v) = map.get("seed")? {
            spec.seed = v;
        }
    }
    if let Some(seed) = seed_flag {
        spec.seed = seed;
    }
    Ok(spec)
}
