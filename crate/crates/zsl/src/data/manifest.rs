//! JSON dataset manifests.
//!
//! ```json
//! {
//!   "features": "features.zslm",
//!   "attributes": "attributes.zslm",
//!   "labels": "labels.txt",
//!   "seen": [0, 1],
//!   "unseen": [2],
//!   "splits": { "train": [0, 1], "test_unseen": [2], "test_seen": [3] },
//!   "standardize": false
//! }
//! ```
//!
//! File paths are relative to the manifest's directory. The labels file holds
//! one integer class ID per line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zsl_core::{Dataset, Splits};

use super::{io_err, load_matrix, save_matrix, DataError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSplits {
    pub train: Vec<usize>,
    pub test_unseen: Vec<usize>,
    #[serde(default)]
    pub test_seen: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub features: PathBuf,
    pub attributes: PathBuf,
    pub labels: PathBuf,
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub splits: ManifestSplits,
    /// Standardise feature dimensions with training-split statistics on load.
    #[serde(default)]
    pub standardize: bool,
}

/// Accepts a manifest file, a directory containing `manifest.json`, or a path
/// that names the manifest without its `.json` extension.
pub fn resolve_manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        return path.join(MANIFEST_FILE);
    }
    if !path.exists() {
        let with_ext = path.with_extension("json");
        if with_ext.exists() {
            return with_ext;
        }
    }
    path.to_path_buf()
}

fn read_labels(path: &Path) -> Result<Vec<usize>, DataError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<usize>().map_err(|e| DataError::Labels {
            path: path.into(),
            line: i + 1,
            detail: format!("expected a class ID, found {line:?} ({e})"),
        })?;
        labels.push(v);
    }
    Ok(labels)
}

/// Loads and validates the dataset a manifest describes.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = resolve_manifest_path(manifest_path.as_ref());
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| DataError::Manifest {
        path: path.clone(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let features_path = base.join(&manifest.features);
    let attributes_path = base.join(&manifest.attributes);
    let labels_path = base.join(&manifest.labels);
    let features = load_matrix(&features_path)?;
    let attributes = load_matrix(&attributes_path)?;
    let labels = read_labels(&labels_path)?;
    if labels.len() != features.rows() {
        return Err(DataError::Dimension {
            path: labels_path,
            detail: format!(
                "{} labels for {} feature rows in {}",
                labels.len(),
                features.rows(),
                features_path.display()
            ),
        });
    }
    let splits = Splits {
        train: manifest.splits.train,
        test_unseen: manifest.splits.test_unseen,
        test_seen: manifest.splits.test_seen,
    };
    let mut ds = Dataset::new(
        features,
        labels,
        attributes,
        manifest.seen,
        manifest.unseen,
        splits,
    )
    .map_err(|source| DataError::Invalid {
        path: path.clone(),
        source,
    })?;
    if manifest.standardize {
        ds.standardize_features()
            .map_err(|source| DataError::Invalid { path, source })?;
    }
    Ok(ds)
}

/// Writes `features.zslm`, `attributes.zslm`, `labels.txt` and
/// `manifest.json` into `dir`, creating it if needed. Returns the manifest
/// path.
pub fn save_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<PathBuf, DataError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = Manifest {
        features: "features.zslm".into(),
        attributes: "attributes.zslm".into(),
        labels: "labels.txt".into(),
        seen: ds.seen().to_vec(),
        unseen: ds.unseen().to_vec(),
        splits: ManifestSplits {
            train: ds.splits().train.clone(),
            test_unseen: ds.splits().test_unseen.clone(),
            test_seen: ds.splits().test_seen.clone(),
        },
        standardize: false,
    };
    save_matrix(dir.join(&manifest.features), ds.features())?;
    save_matrix(dir.join(&manifest.attributes), ds.attributes())?;
    let mut labels = String::with_capacity(ds.labels().len() * 3);
    for l in ds.labels() {
        labels.push_str(&l.to_string());
        labels.push('\n');
    }
    let labels_path = dir.join(&manifest.labels);
    std::fs::write(&labels_path, labels).map_err(io_err(&labels_path))?;
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(path)
}
