//! Leave-one-out Gaussian KDE entropy in a whitened space.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::math::{whiten, Tensor, SAMPLE_RIDGE};

/// Largest sample count accepted (the pairwise pass is `O(N²)`).
pub const MAX_KDE_SAMPLES: usize = 50_000;
/// Largest dimension accepted.
pub const MAX_KDE_DIM: usize = 16;

/// Bandwidth multipliers around Scott's factor.
pub fn default_bandwidth_grid() -> Vec<f64> {
    vec![0.5, 1.0 / SQRT_2, 1.0, SQRT_2, 2.0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeEntropy {
    /// Differential entropy of the original samples (nats).
    pub entropy: f64,
    /// Chosen bandwidth in whitened coordinates.
    pub bandwidth: f64,
    /// Mean LOO log-likelihood per multiplier, in grid order.
    pub log_likelihoods: Vec<f64>,
}

/// Picks `h = κ N^{−1/(m+4)}` maximizing the LOO log-likelihood and returns
/// `Ĥ = −ℓ(h*) + ½ log det Ĉ`.
pub fn kde_loo_entropy(samples: &Tensor, multipliers: &[f64]) -> Result<KdeEntropy> {
    let (n, m) = samples.shape();
    if n <= m + 1 {
        return Err(Error::DegenerateSample(format!("KDE needs N > m + 1, got N={n}, m={m}")));
    }
    if n > MAX_KDE_SAMPLES || m > MAX_KDE_DIM {
        return Err(Error::ConfigInvalid(format!(
            "KDE limited to N ≤ {MAX_KDE_SAMPLES}, m ≤ {MAX_KDE_DIM}; got N={n}, m={m}"
        )));
    }
    if multipliers.is_empty() || multipliers.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::ConfigInvalid("bandwidth multipliers must be positive".into()));
    }
    let white = whiten(samples, SAMPLE_RIDGE)?;
    let u = &white.samples;
    let scott = (n as f64).powf(-1.0 / (m as f64 + 4.0));
    let hs: Vec<f64> = multipliers.iter().map(|k| k * scott).collect();
    let inv2h2: Vec<f64> = hs.iter().map(|h| 0.5 / (h * h)).collect();
    let norm: Vec<f64> = hs.iter().map(|h| -0.5 * m as f64 * (2.0 * PI * h * h).ln()).collect();
    let log_nm1 = ((n - 1) as f64).ln();

    let mut totals = vec![0.0; hs.len()];
    let mut d2 = vec![0.0; n];
    let mut sums = vec![0.0; hs.len()];
    for i in 0..n {
        let ui = u.row(i);
        let mut min_d2 = f64::INFINITY;
        for (j, slot) in d2.iter_mut().enumerate() {
            let uj = u.row(j);
            let d: f64 = ui.iter().zip(uj).map(|(a, b)| (a - b) * (a - b)).sum();
            *slot = d;
            if j != i && d < min_d2 {
                min_d2 = d;
            }
        }
        // log Σ_{j≠i} exp(−d²/2h²) shifted by the nearest neighbour
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, &d) in d2.iter().enumerate() {
            if j == i {
                continue;
            }
            for (s, c) in sums.iter_mut().zip(&inv2h2) {
                *s += (-(d - min_d2) * c).exp();
            }
        }
        for b in 0..hs.len() {
            totals[b] += norm[b] - min_d2 * inv2h2[b] + sums[b].ln() - log_nm1;
        }
    }
    let log_likelihoods: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    let (best, &ll) = log_likelihoods
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::DegenerateSample("LOO log-likelihood is not finite".into()))?;
    Ok(KdeEntropy { entropy: -ll - white.log_det_transform, bandwidth: hs[best], log_likelihoods })
}

/// `I(X; Y_t) ≈ Ĥ(Y) − (m/2) log(2πe t)`; also returns the entropy fit.
pub fn mi_kde(y: &Tensor, t: f64, multipliers: &[f64]) -> Result<(f64, KdeEntropy)> {
    if !(t > 0.0) {
        return Err(Error::ConfigInvalid(format!("noise variance must be positive, got {t}")));
    }
    let fit = kde_loo_entropy(y, multipliers)?;
    let cond = 0.5 * y.cols() as f64 * (2.0 * PI * std::f64::consts::E * t).ln();
    Ok((fit.entropy - cond, fit))
}
