use serde::Serialize;

use super::{KilledKernel, SpectralError};
use crate::numeric;

pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Dominant eigenvalue of a killed kernel with its Perron vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenTriple {
    pub lambda: f64,
    /// Collatz-Wielandt bracket `min_x (Pv)(x)/v(x) <= lambda <= max_x (Pv)(x)/v(x)`.
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    /// Left (row) vector, normalized to sum 1.
    pub left: Vec<f64>,
    /// Right (column) vector, normalized so the first entry is 1.
    pub right: Vec<f64>,
    /// `max |left P - lambda left|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration from the all-ones vector, forward for the right vector and
/// transposed for the left one, until the Collatz-Wielandt bracket of the right
/// vector and the left residual both fall below `tol`.
pub fn dominant_eigen(kernel: &KilledKernel, tol: f64) -> Result<EigenTriple, SpectralError> {
    dominant_eigen_capped(kernel, tol, DEFAULT_MAX_ITERATIONS)
}

pub fn dominant_eigen_capped(
    kernel: &KilledKernel,
    tol: f64,
    max_iterations: usize,
) -> Result<EigenTriple, SpectralError> {
    if !(tol > 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let d = kernel.dim();
    let mut right = vec![1.0; d];
    let mut left = vec![1.0 / d as f64; d];
    let mut next = vec![0.0; d];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut lambda;

    for it in 1..=max_iterations {
        kernel.right_mul(&right, &mut next);
        let (lo, hi) = collatz_wielandt(&right, &next);
        lower = lo;
        upper = hi;
        let scale = next[0];
        for (r, n) in right.iter_mut().zip(&next) {
            *r = n / scale;
        }

        kernel.left_mul(&left, &mut next);
        let mass = numeric::sum(next.iter().copied());
        lambda = 0.5 * (lower + upper);
        residual = next
            .iter()
            .zip(&left)
            .map(|(n, l)| (n - lambda * l).abs())
            .fold(0.0, f64::max);
        for (l, n) in left.iter_mut().zip(&next) {
            *l = n / mass;
        }

        if upper - lower < tol && residual < tol && left_settled(kernel, &left, lambda, tol, &mut next) {
            return Ok(EigenTriple {
                lambda,
                lambda_lower: lower,
                lambda_upper: upper,
                left,
                right,
                residual,
                iterations: it,
            });
        }
    }
    Err(SpectralError::NonConvergence {
        iterations: max_iterations,
        residual: residual.max(upper - lower),
    })
}

/// Componentwise check `|(lP)(y)/l(y) - lambda| < tol` over entries that are
/// not lost to underflow. The left vector of these kernels decays roughly like
/// a power of `1/y!`, so a plain max-norm residual says nothing about its tail.
fn left_settled(kernel: &KilledKernel, left: &[f64], lambda: f64, tol: f64, scratch: &mut [f64]) -> bool {
    kernel.left_mul(left, scratch);
    let top = left.iter().copied().fold(0.0, f64::max);
    left.iter()
        .zip(scratch.iter())
        .filter(|(l, _)| **l > top * 1e-250)
        .all(|(l, s)| (s / l - lambda).abs() < tol)
}

fn collatz_wielandt(v: &[f64], pv: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (x, y) in v.iter().zip(pv) {
        if *x > 0.0 {
            let r = y / x;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}
