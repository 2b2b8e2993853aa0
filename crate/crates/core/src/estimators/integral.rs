//! Fisher information and the two integral routes to mutual information.

use crate::error::{Error, Result};
use crate::math::linalg::check_increasing;
use crate::math::{logspace, mean_and_stderr, trapezoid_cumulative, Tensor};
use crate::scores::ScoreModel;

/// Points on the default Fisher-integral grid.
pub const FISHER_GRID_POINTS: usize = 400;
/// Upper end of the default grid relative to `t*`.
pub const FISHER_GRID_SPAN: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMeaning {
    Gradient,
    Mi,
    Fisher,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub meaning: CurveMeaning,
}

/// `Ĵ = (1/N) Σ ‖s(yᵢ [, τᵢ])‖²` and its standard error.
pub fn fisher_information(score: &ScoreModel, y: &Tensor, tau: Option<&Tensor>) -> Result<(f64, f64)> {
    if y.rows() < 2 {
        return Err(Error::DegenerateSample("Fisher estimate needs at least two samples".into()));
    }
    let s = score.eval(y, tau)?;
    let sq: Vec<f64> = (0..s.rows()).map(|i| s.row(i).iter().map(|v| v * v).sum()).collect();
    Ok(mean_and_stderr(&sq))
}

/// `I(η) = anchor + ∫_{η₀}^{η} ∂I` by the cumulative trapezoid rule.
pub fn path_integral_mi(grid: &[f64], grads: &[f64], anchor: f64) -> Result<MiCurve> {
    let cum = trapezoid_cumulative(grid, grads)?;
    Ok(MiCurve { grid: grid.to_vec(), values: cum.into_iter().map(|v| anchor + v).collect(), meaning: CurveMeaning::Mi })
}

/// Log-spaced grid from `t*` to `10⁴ t*`.
pub fn fisher_grid(t_star: f64) -> Vec<f64> {
    logspace(t_star, FISHER_GRID_SPAN * t_star, FISHER_GRID_POINTS)
}

fn half_trapezoid(t_grid: &[f64], integrand: &[f64]) -> Result<f64> {
    if t_grid.len() != integrand.len() || t_grid.is_empty() {
        return Err(Error::ShapeMismatch("grid and values differ in length".into()));
    }
    check_increasing(t_grid)?;
    if let Some(i) = integrand.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("Fisher integrand at grid index {i}")));
    }
    Ok(0.5 * trapezoid_cumulative(t_grid, integrand)?.last().copied().unwrap_or(0.0))
}

/// `I(X; Y_{t*}) ≈ ½ ∫ (m/t − J(t)) dt` over the grid, starting at `t*`.
pub fn fisher_integral_mi(t_grid: &[f64], j_values: &[f64], m: usize) -> Result<f64> {
    let integrand: Vec<f64> = t_grid.iter().zip(j_values).map(|(t, j)| m as f64 / t - j).collect();
    half_trapezoid(t_grid, &integrand)
}

/// `I(T; Y_{t*}) ≈ ½ ∫ (J(t) − E_T J(t | T)) dt`.
pub fn fisher_integral_task_mi(t_grid: &[f64], j_values: &[f64], j_cond: &[f64]) -> Result<f64> {
    if j_values.len() != j_cond.len() {
        return Err(Error::ShapeMismatch("marginal and conditional Fisher arrays differ".into()));
    }
    let integrand: Vec<f64> = j_cond.iter().zip(j_values).map(|(jc, j)| jc - j).collect();
    half_trapezoid(t_grid, &integrand)
}

/// Leading-order mass beyond `t_max` for an output with signal power `tr Σ_W`:
/// `½ ∫_{t_max}^∞ tr Σ_W / t² dt`.
pub fn fisher_tail_bound(signal_power: f64, t_max: f64) -> f64 {
    0.5 * signal_power / t_max
}
