//! Monte Carlo information gradients via parameter VJPs.
//!
//! Scores are evaluated once per batch and then treated as constants, so the
//! estimators never see (or touch) score-model parameters.

use crate::channels::{ChannelBatch, FrontEnd};
use crate::error::{Error, Result};
use crate::math::Tensor;
use crate::scores::ScoreModel;

/// Batch-mean gradient with per-coordinate Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: usize,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn as_tensor(&self, rows: usize, cols: usize) -> Result<Tensor> {
        Tensor::new(rows, cols, self.grad.clone())
    }
}

fn estimate(fe: &FrontEnd, batch: &ChannelBatch, v: &Tensor, sign: f64) -> Result<GradientEstimate> {
    let (mean, stderr) = fe.batch_param_vjp(&batch.x, v)?;
    let grad = if sign == 1.0 { mean } else { mean.into_iter().map(|g| sign * g).collect() };
    Ok(GradientEstimate { grad, stderr, n: batch.len() })
}

/// `∇_η I(X; Y_t) ≈ −(1/B) Σ Df_η(xᵢ)ᵀ s(yᵢ)`.
pub fn info_gradient(fe: &FrontEnd, score: &ScoreModel, batch: &ChannelBatch) -> Result<GradientEstimate> {
    if score.is_conditional() {
        return Err(Error::ShapeMismatch("info_gradient needs an unconditional score".into()));
    }
    let s = score.eval(&batch.y, None)?;
    estimate(fe, batch, &s, -1.0)
}

/// `∇_η I(T; Y_t) ≈ (1/B) Σ Df_η(xᵢ)ᵀ (s(yᵢ|τᵢ) − s(yᵢ))`.
///
/// Runs through [`ib_gradient`] with `β = 0`, so the two agree bit for bit.
pub fn task_info_gradient(
    fe: &FrontEnd,
    cond: &ScoreModel,
    uncond: &ScoreModel,
    batch: &ChannelBatch,
) -> Result<GradientEstimate> {
    ib_gradient(fe, cond, uncond, 0.0, batch)
}

/// Gradient of `I(T; Y_t) − β I(X; Y_t)`:
/// `(1/B) Σ Df_η(xᵢ)ᵀ (s(yᵢ|τᵢ) + (β − 1) s(yᵢ))`.
pub fn ib_gradient(
    fe: &FrontEnd,
    cond: &ScoreModel,
    uncond: &ScoreModel,
    beta: f64,
    batch: &ChannelBatch,
) -> Result<GradientEstimate> {
    if !(beta >= 0.0) {
        return Err(Error::ConfigInvalid(format!("beta must be nonnegative, got {beta}")));
    }
    let tau = batch.tau.as_ref().ok_or(Error::MissingCondition)?;
    if !cond.is_conditional() || uncond.is_conditional() {
        return Err(Error::ShapeMismatch("expected one conditional and one unconditional score".into()));
    }
    let mut v = cond.eval(&batch.y, Some(tau))?;
    let coef = beta - 1.0;
    if coef != 0.0 {
        v.axpy(coef, &uncond.eval(&batch.y, None)?)?;
    }
    estimate(fe, batch, &v, 1.0)
}

/// Chain rule for a utility of the information: `∇U(I) = U′(I) ∇I`.
pub fn utility_scaled_gradient(grad: &GradientEstimate, u_prime: f64) -> GradientEstimate {
    GradientEstimate {
        grad: grad.grad.iter().map(|g| u_prime * g).collect(),
        stderr: grad.stderr.iter().map(|s| u_prime.abs() * s).collect(),
        n: grad.n,
    }
}
