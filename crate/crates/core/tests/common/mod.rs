#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsl_core::{init_model, Dataset, HyperParams, Matrix, ModelParams, ParamId, Splits};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Initialised model with non-zero biases so bias gradients get exercised.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    d_v: usize,
    d_s: usize,
    classes: usize,
    hp: &HyperParams,
) -> ModelParams {
    let mut p = init_model(d_v, d_s, classes, hp, rng.random()).unwrap();
    for id in [
        ParamId::VisualB,
        ParamId::SemanticB1,
        ParamId::SemanticB2,
        ParamId::ClassifierB,
    ] {
        let cols = p.param(id).cols();
        p.set_param(id, random_matrix(rng, 1, cols, 0.3)).unwrap();
    }
    p
}

/// Small random dataset: `seen` classes with `train` + `test` samples each,
/// `unseen` classes with `test` samples each. Class IDs are shuffled between
/// the two groups so seen and unseen interleave.
pub fn toy_dataset(
    rng: &mut ChaCha8Rng,
    seen: usize,
    unseen: usize,
    train: usize,
    test: usize,
    d_v: usize,
    d_s: usize,
) -> Dataset {
    let classes = seen + unseen;
    let mut ids: Vec<usize> = (0..classes).collect();
    for i in (1..classes).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    let (seen_ids, unseen_ids) = ids.split_at(seen);
    let mut labels = Vec::new();
    let mut splits = Splits::default();
    for &c in seen_ids {
        for _ in 0..train {
            splits.train.push(labels.len());
            labels.push(c);
        }
        for _ in 0..test {
            splits.test_seen.push(labels.len());
            labels.push(c);
        }
    }
    for &c in unseen_ids {
        for _ in 0..test {
            splits.test_unseen.push(labels.len());
            labels.push(c);
        }
    }
    let features = random_matrix(rng, labels.len(), d_v, 1.0);
    let attributes = random_matrix(rng, classes, d_s, 1.0);
    Dataset::new(
        features,
        labels,
        attributes,
        seen_ids.to_vec(),
        unseen_ids.to_vec(),
        splits,
    )
    .unwrap()
}

pub fn small_hp(embed_dim: usize, epochs: usize) -> HyperParams {
    HyperParams {
        embed_dim,
        epochs,
        batch_size: 8,
        lr: 1e-2,
        seed: 11,
        ..HyperParams::new(0.7, 1e-3)
    }
}
