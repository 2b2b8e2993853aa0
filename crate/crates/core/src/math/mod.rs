//! Deterministic numerics shared by every other module.

pub mod linalg;
pub mod rng;
pub mod tensor;

pub use linalg::{
    cholesky, frobenius_project, linspace, logspace, singular_values, solve_psd,
    trapezoid_cumulative, whiten, PsdFactor, Whitened, ORACLE_RIDGE, SAMPLE_RIDGE,
};
pub use rng::{sample_gaussian, SeededRng};
pub use tensor::Tensor;

/// Fixed-order pairwise sum; results do not depend on how callers chunk the input.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
