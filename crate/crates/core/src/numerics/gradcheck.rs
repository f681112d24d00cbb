use alloc::format;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Central-difference gradient of a scalar function of a matrix.
///
/// Each entry is `(f(x + h·e) - f(x - h·e)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &Matrix, h: f64) -> Result<Matrix>
where
    F: FnMut(&Matrix) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.as_slice().len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let plus = f(&probe);
        probe.as_mut_slice()[i] = orig - h;
        let minus = f(&probe);
        probe.as_mut_slice()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: format!("finite difference at flat entry {i}"),
            });
        }
        grad.as_mut_slice()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]);
        let g = finite_diff_grad(|m| m.sq_norm(), &x, 1e-6).unwrap();
        assert!(g.max_abs_diff(&Matrix::from_rows(&[[2.0, 4.0]])).unwrap() < 1e-6);
    }

    #[test]
    fn constant_function() {
        let g = finite_diff_grad(|_| 3.5, &Matrix::filled(2, 3, 1.0), 1e-6).unwrap();
        assert_eq!(g, Matrix::zeros(2, 3));
    }

    #[test]
    fn non_finite_value_is_an_error() {
        let err = finite_diff_grad(|m| if m[(0, 0)] > 0.0 { f64::INFINITY } else { 0.0 }, &Matrix::zeros(1, 1), 1e-6);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }
}
