//! Denoising score matching on channel batches.
//!
//! The loss for one batch is
//!
//! ```text
//! L(θ) = (1/B) Σᵢ ‖ s_θ(uᵢ + σ εᵢ [, τᵢ]) + εᵢ / σ ‖²
//! ```
//!
//! where `(u, σ) = (w, √t)` targets the score of `Y_t` itself and
//! `(u, σ) = (y, σ_fixed)` targets the score of `Y_t` smoothed by a small
//! extra Gaussian. Only the `y` part of a conditional input is perturbed.

use crate::channels::ChannelBatch;
use crate::error::{Error, Result};
use crate::math::{SeededRng, Tensor};

use super::adamw::{AdamWConfig, AdamWState};
use super::mlp::MlpNet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DsmMode {
    /// Perturb the clean front-end output `w` at level `√t`.
    PerturbWSqrtT,
    /// Perturb the channel output `y` at a fixed level `σ`.
    PerturbYFixed { sigma: f64 },
}

impl DsmMode {
    pub fn sigma(&self, t: f64) -> f64 {
        match self {
            DsmMode::PerturbWSqrtT => t.sqrt(),
            DsmMode::PerturbYFixed { sigma } => *sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsmConfig {
    pub mode: DsmMode,
    /// Optimizer steps per training call (one fresh batch per step).
    pub steps: usize,
    pub batch: usize,
    pub optimizer: AdamWConfig,
}

impl DsmConfig {
    pub fn validate(&self) -> Result<()> {
        if let DsmMode::PerturbYFixed { sigma } = self.mode {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::ConfigInvalid(format!("DSM sigma must be positive, got {sigma}")));
            }
        }
        if self.batch == 0 {
            return Err(Error::ConfigInvalid("DSM batch must be positive".into()));
        }
        Ok(())
    }
}

/// One optimizer step on a batch; returns the loss before the step.
///
/// A net whose input is wider than `m` is treated as conditional and receives
/// `[ũ; τ]`, which requires `batch.tau`.
pub fn dsm_step(
    net: &mut MlpNet,
    batch: &ChannelBatch,
    mode: DsmMode,
    opt: &mut AdamWState,
    rng: &mut SeededRng,
) -> Result<f64> {
    let (u, sigma) = match mode {
        DsmMode::PerturbWSqrtT => (&batch.w, batch.t.sqrt()),
        DsmMode::PerturbYFixed { sigma } => (&batch.y, sigma),
    };
    let (b, m) = u.shape();
    if net.output_dim() != m {
        return Err(Error::ShapeMismatch(format!("net output {} vs channel dim {m}", net.output_dim())));
    }
    let eps = rng.gaussian_tensor(b, m, 1.0);
    let mut perturbed = u.clone();
    perturbed.axpy(sigma, &eps)?;
    let input = if net.input_dim() > m {
        let tau = batch.tau.as_ref().ok_or(Error::MissingCondition)?;
        perturbed.hconcat(tau)?
    } else {
        perturbed
    };
    let out = net.forward(&input)?;
    // residual r = s + ε/σ; L = mean ‖r‖², dL/ds = 2r / B
    let mut resid = out;
    resid.axpy(1.0 / sigma, &eps)?;
    let loss = resid.data().iter().map(|v| v * v).sum::<f64>() / b as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: opt.step_count() as usize });
    }
    let upstream = resid.scale(2.0);
    let mut grads = net.forward_backward(&input, &upstream)?.param_grads;
    opt.update(net.params_mut(), &mut grads)
        .map_err(|_| Error::NonFiniteLoss { step: opt.step_count() as usize })?;
    Ok(loss)
}

/// Runs `cfg.steps` DSM steps, drawing a fresh batch from `sample` each step.
/// Returns the per-step losses.
pub fn train_dsm(
    net: &mut MlpNet,
    cfg: &DsmConfig,
    opt: &mut AdamWState,
    rng: &mut SeededRng,
    mut sample: impl FnMut(&mut SeededRng) -> Result<ChannelBatch>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let batch = sample(rng)?;
        losses.push(dsm_step(net, &batch, cfg.mode, opt, rng)?);
    }
    Ok(losses)
}

/// Fresh optimizer state for a net.
pub fn optimizer_for(net: &MlpNet, cfg: AdamWConfig) -> AdamWState {
    AdamWState::new(cfg, net.num_params())
}

/// Evaluation-only DSM loss (no update), used for diagnostics.
pub fn dsm_loss(net: &MlpNet, batch: &ChannelBatch, mode: DsmMode, rng: &mut SeededRng) -> Result<f64> {
    let (u, sigma) = match mode {
        DsmMode::PerturbWSqrtT => (&batch.w, batch.t.sqrt()),
        DsmMode::PerturbYFixed { sigma } => (&batch.y, sigma),
    };
    let eps = rng.gaussian_tensor(u.rows(), u.cols(), 1.0);
    let mut perturbed: Tensor = u.clone();
    perturbed.axpy(sigma, &eps)?;
    let input = if net.input_dim() > u.cols() {
        perturbed.hconcat(batch.tau.as_ref().ok_or(Error::MissingCondition)?)?
    } else {
        perturbed
    };
    let mut resid = net.forward(&input)?;
    resid.axpy(1.0 / sigma, &eps)?;
    Ok(resid.data().iter().map(|v| v * v).sum::<f64>() / u.rows() as f64)
}
