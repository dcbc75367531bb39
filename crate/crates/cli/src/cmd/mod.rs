//! Subcommand implementations. Each module exposes one `run` function;
//! `main` maps their errors to the documented exit codes.

pub mod augment;
pub mod check_grad;
pub mod eval;
pub mod grid;
pub mod synth;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};
use daforge_core::data::{load_wmd, Dataset};

/// Failure families that carry a dedicated exit code beyond their source
/// error type.
#[derive(Debug, thiserror::Error)]
pub enum Fatal {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    load_wmd(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
