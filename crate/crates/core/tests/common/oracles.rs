//! Naive reference implementations, written independently of the library's
//! batched code paths.

#![allow(dead_code)]

use zsl_core::{Matrix, ModelParams, ParamId};

fn dense_relu(input: &[f64], w: &Matrix, b: &Matrix) -> Vec<f64> {
    (0..w.cols())
        .map(|j| {
            let mut s = b[(0, j)];
            for (k, v) in input.iter().enumerate() {
                s += v * w[(k, j)];
            }
            if s > 0.0 {
                s
            } else {
                0.0
            }
        })
        .collect()
}

pub fn visual(params: &ModelParams, x: &[f64]) -> Vec<f64> {
    dense_relu(x, params.param(ParamId::VisualW), params.param(ParamId::VisualB))
}

pub fn semantic(params: &ModelParams, z: &[f64]) -> Vec<f64> {
    let h = dense_relu(z, params.param(ParamId::SemanticW1), params.param(ParamId::SemanticB1));
    dense_relu(&h, params.param(ParamId::SemanticW2), params.param(ParamId::SemanticB2))
}

/// Nearest candidate by squared distance, ties to the smaller class ID.
/// Candidates may come in any order.
pub fn predict(
    params: &ModelParams,
    x: &[f64],
    attributes: &Matrix,
    candidates: &[usize],
) -> (usize, f64) {
    let phi = visual(params, x);
    let mut best: Option<(usize, f64)> = None;
    for &c in candidates {
        let psi = semantic(params, attributes.row(c));
        let d: f64 = phi.iter().zip(&psi).map(|(a, b)| (a - b) * (a - b)).sum();
        best = match best {
            None => Some((c, d)),
            Some((bc, bd)) if d < bd || (d == bd && c < bc) => Some((c, d)),
            keep => keep,
        };
    }
    best.expect("at least one candidate")
}

/// `(sample, class, gap)` triples kept per class after sorting by gap, then
/// sample; classes in ascending order.
pub fn select(
    predictions: &[(usize, usize, f64)],
    unseen: &[usize],
    m: usize,
) -> Vec<(usize, usize, f64)> {
    let mut classes = unseen.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut out = Vec::new();
    for c in classes {
        let mut mine: Vec<(usize, usize, f64)> =
            predictions.iter().copied().filter(|p| p.1 == c).collect();
        mine.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
        mine.truncate(m);
        out.extend(mine);
    }
    out
}

/// `(class, correct, count)` for classes with samples, plus their mean
/// accuracy.
pub fn per_class(
    predicted: &[usize],
    truth: &[usize],
    classes: &[usize],
) -> (Vec<(usize, usize, usize)>, f64) {
    let mut rows = Vec::new();
    let mut sum = 0.0;
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for c in sorted {
        let mut correct = 0;
        let mut count = 0;
        for i in 0..truth.len() {
            if truth[i] == c {
                count += 1;
                if predicted[i] == c {
                    correct += 1;
                }
            }
        }
        if count > 0 {
            sum += correct as f64 / count as f64;
            rows.push((c, correct, count));
        }
    }
    let mean = if rows.is_empty() {
        0.0
    } else {
        sum / rows.len() as f64
    };
    (rows, mean)
}
