//! Dense matrices, differentiable layers with analytic gradients, Adam and a
//! finite-difference gradient checker.

mod adam;
mod gradcheck;
mod matrix;
mod ops;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use matrix::{dot, matmul, matmul_nt, matmul_tn, sq_dist, Matrix};
pub use ops::{
    affine, affine_relu_backward, affine_relu_forward, relu_in_place, softmax_cross_entropy,
    AffineReluCache, AffineReluGrads,
};
