//! Seeded synthetic zero-shot benchmark.
//!
//! Class attribute vectors are standard-normal draws normalised to unit
//! length. A single random linear map `A` (`d_v x d_s`, standard-normal
//! entries) turns a class's attributes into its visual prototype, and each
//! sample is `A·z_c + ε` with `ε ~ N(0, σ²)` per entry. Seen classes take the
//! first `seen_classes` IDs, unseen classes the rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use zsl_core::{Dataset, Matrix, Splits};

use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seen_classes: usize,
    pub unseen_classes: usize,
    /// Training samples per seen class.
    pub train_per_class: usize,
    /// Test samples per class (seen and unseen).
    pub test_per_class: usize,
    pub visual_dim: usize,
    pub semantic_dim: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seen_classes: 15,
            unseen_classes: 5,
            train_per_class: 100,
            test_per_class: 20,
            visual_dim: 64,
            semantic_dim: 16,
            sigma: 0.1,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let counts = [
            ("seen_classes", self.seen_classes),
            ("unseen_classes", self.unseen_classes),
            ("train_per_class", self.train_per_class),
            ("test_per_class", self.test_per_class),
            ("visual_dim", self.visual_dim),
            ("semantic_dim", self.semantic_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(DataError::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(DataError::Config("sigma must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Whether the visual space is at least as wide as the semantic one.
    /// Narrower visual spaces make `A` lossy.
    pub fn is_well_posed(&self) -> bool {
        self.visual_dim >= self.semantic_dim
    }
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

/// Builds the dataset described by `cfg`. Pure function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let classes = cfg.seen_classes + cfg.unseen_classes;

    let mut attributes = normal_matrix(classes, cfg.semantic_dim, &mut rng);
    for c in 0..classes {
        let row = attributes.row_mut(c);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in row {
            *v /= norm;
        }
    }
    let map = normal_matrix(cfg.visual_dim, cfg.semantic_dim, &mut rng);
    // prototypes[c] = A · z_c
    let prototypes = zsl_core::numerics::matmul_nt(&attributes, &map)?;

    let per_seen = cfg.train_per_class + cfg.test_per_class;
    let total = cfg.seen_classes * per_seen + cfg.unseen_classes * cfg.test_per_class;
    let mut features = Vec::with_capacity(total * cfg.visual_dim);
    let mut labels = Vec::with_capacity(total);
    let mut splits = Splits::default();
    let mut emit = |class: usize, rng: &mut ChaCha8Rng, features: &mut Vec<f64>| {
        for &p in prototypes.row(class) {
            let noise: f64 = if cfg.sigma > 0.0 {
                cfg.sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            features.push(p + noise);
        }
        labels.push(class);
        labels.len() - 1
    };
    for class in 0..classes {
        if class < cfg.seen_classes {
            for _ in 0..cfg.train_per_class {
                splits.train.push(emit(class, &mut rng, &mut features));
            }
            for _ in 0..cfg.test_per_class {
                splits.test_seen.push(emit(class, &mut rng, &mut features));
            }
        } else {
            for _ in 0..cfg.test_per_class {
                splits.test_unseen.push(emit(class, &mut rng, &mut features));
            }
        }
    }
    let features = Matrix::from_vec(total, cfg.visual_dim, features)?;
    Ok(Dataset::new(
        features,
        labels,
        attributes,
        (0..cfg.seen_classes).collect(),
        (cfg.seen_classes..classes).collect(),
        splits,
    )?)
}
