//! On-disk formats: matrix files, dataset manifests, checkpoints, and the
//! synthetic benchmark generator.

mod checkpoint;
mod manifest;
mod matrix_file;
mod synth;

use std::path::PathBuf;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use manifest::{load_dataset, resolve_manifest_path, save_dataset, Manifest, ManifestSplits};
pub use matrix_file::{decode_matrix, encode_matrix, load_matrix, save_matrix, MATRIX_MAGIC, MATRIX_VERSION};
pub use synth::{generate_synthetic, SynthConfig};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic, expected {expected:?}")]
    Magic { path: PathBuf, expected: &'static str },
    #[error("{path}: unsupported format version {found} (supported: {supported})")]
    Version {
        path: PathBuf,
        found: u16,
        supported: u16,
    },
    #[error("{path}: truncated {what}")]
    Truncated { path: PathBuf, what: String },
    #[error("{path}: dimension mismatch: {detail}")]
    Dimension { path: PathBuf, detail: String },
    #[error("{path}: malformed manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Labels {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: zsl_core::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] zsl_core::Error),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> DataError {
    let path = path.into();
    move |source| DataError::Io { path, source }
}
