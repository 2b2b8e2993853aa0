//! AdamW with global-norm gradient clipping.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global L2 norm cap applied before the update; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4, clip_norm: Some(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub config: AdamWConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl AdamWState {
    pub fn new(config: AdamWConfig, num_params: usize) -> Self {
        Self { config, first: vec![0.0; num_params], second: vec![0.0; num_params], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_params(&self) -> usize {
        self.first.len()
    }

    /// Clips `grads` in place, then applies one decoupled-decay Adam update.
    /// Returns the pre-clip gradient norm.
    pub fn update(&mut self, params: &mut [f64], grads: &mut [f64]) -> Result<f64> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer holds {} moments, got {} params / {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("gradient norm".into()));
        }
        if let Some(cap) = self.config.clip_norm {
            if norm > cap {
                let s = cap / norm;
                grads.iter_mut().for_each(|g| *g *= s);
            }
        }
        self.step += 1;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = c.beta1 * self.first[i] + (1.0 - c.beta1) * g;
            self.second[i] = c.beta2 * self.second[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.first[i] / bc1;
            let v_hat = self.second[i] / bc2;
            params[i] -= c.lr * (m_hat / (v_hat.sqrt() + c.eps) + c.weight_decay * params[i]);
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_in_sign_direction() {
        let cfg = AdamWConfig { weight_decay: 0.0, clip_norm: None, ..Default::default() };
        let mut opt = AdamWState::new(cfg, 2);
        let mut p = vec![1.0, -1.0];
        let mut g = vec![0.5, -2.0];
        opt.update(&mut p, &mut g).unwrap();
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p[1] - (-1.0 + 1e-3)).abs() < 1e-9);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut opt = AdamWState::new(AdamWConfig::default(), 2);
        let mut p = vec![0.0, 0.0];
        let mut g = vec![3.0, 4.0];
        let norm = opt.update(&mut p, &mut g).unwrap();
        assert_eq!(norm, 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let cfg = AdamWConfig { lr: 0.05, weight_decay: 0.0, ..Default::default() };
        let mut opt = AdamWState::new(cfg, 3);
        let target = [1.0, -2.0, 0.5];
        let mut p = vec![0.0; 3];
        for _ in 0..2000 {
            let mut g: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            opt.update(&mut p, &mut g).unwrap();
        }
        for (a, b) in p.iter().zip(&target) {
            assert!((a - b).abs() < 1e-2);
        }
    }

    #[test]
    fn weight_decay_shrinks_without_gradient() {
        let cfg = AdamWConfig { weight_decay: 0.1, ..Default::default() };
        let mut opt = AdamWState::new(cfg, 1);
        let mut p = vec![2.0];
        opt.update(&mut p, &mut [0.0]).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 1e-4)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        let mut opt = AdamWState::new(AdamWConfig::default(), 2);
        assert!(opt.update(&mut [0.0], &mut [0.0]).is_err());
        assert!(opt.update(&mut [0.0, 0.0], &mut [f64::NAN, 0.0]).is_err());
    }
}
