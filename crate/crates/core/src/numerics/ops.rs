//! Differentiable building blocks with hand-written backward passes.

use alloc::vec::Vec;

use super::matrix::{matmul, matmul_nt, matmul_tn, Matrix};
use crate::error::{Error, Result};

/// What `affine_relu_backward` needs from the forward pass.
#[derive(Debug, Clone)]
pub struct AffineReluCache {
    x: Matrix,
    w: Matrix,
    pre: Matrix,
}

impl AffineReluCache {
    /// Pre-activation `x·w + b`.
    pub fn pre_activation(&self) -> &Matrix {
        &self.pre
    }
}

/// Gradients of an affine + ReLU layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineReluGrads {
    pub dx: Matrix,
    pub dw: Matrix,
    pub db: Matrix,
}

/// `x·w + b` with `b` broadcast across rows.
pub fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::shape("affine bias", w.shape(), b.shape()));
    }
    let mut out = matmul(x, w)?;
    out.add_row_broadcast(b)?;
    Ok(out)
}

/// `max(0, x·w + b)`, returning the output and a backward cache.
pub fn affine_relu_forward(
    x: &Matrix,
    w: &Matrix,
    b: &Matrix,
) -> Result<(Matrix, AffineReluCache)> {
    let pre = affine(x, w, b)?;
    let mut out = pre.clone();
    relu_in_place(&mut out);
    let cache = AffineReluCache {
        x: x.clone(),
        w: w.clone(),
        pre,
    };
    Ok((out, cache))
}

pub fn relu_in_place(m: &mut Matrix) {
    for v in m.as_mut_slice() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
}

/// Backward pass of [`affine_relu_forward`]. The ReLU derivative at exactly
/// zero is taken as zero.
pub fn affine_relu_backward(dout: &Matrix, cache: &AffineReluCache) -> Result<AffineReluGrads> {
    if dout.shape() != cache.pre.shape() {
        return Err(Error::shape(
            "affine_relu_backward",
            dout.shape(),
            cache.pre.shape(),
        ));
    }
    let mut dpre = dout.clone();
    for (g, &p) in dpre.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(AffineReluGrads {
        dx: matmul_nt(&dpre, &cache.w)?,
        dw: matmul_tn(&cache.x, &dpre)?,
        db: dpre.col_sums(),
    })
}

/// Mean softmax cross-entropy over rows and its gradient w.r.t. the logits.
///
/// Each row is shifted by its maximum before exponentiating.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape(
            "softmax_cross_entropy labels",
            logits.shape(),
            (labels.len(), 1),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Index {
            what: "label",
            index: bad,
            bound: k,
        });
    }
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, k)));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, k);
    let mut loss = 0.0;
    let mut exps: Vec<f64> = Vec::with_capacity(k);
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        exps.clear();
        exps.extend(row.iter().map(|&v| libm::exp(v - max)));
        let sum: f64 = exps.iter().sum();
        loss += libm::log(sum) - (row[label] - max);
        let grow = grad.row_mut(r);
        for (g, e) in grow.iter_mut().zip(&exps) {
            *g = e / sum * inv_n;
        }
        grow[label] -= inv_n;
    }
    Ok((loss * inv_n, grad))
}
