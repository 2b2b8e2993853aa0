//! Closed-form mutual information and gradients for linear-Gaussian channels.
//!
//! With `t > 0` every output covariance is bounded below by `t I`, so these
//! factorizations run without a ridge. A ridge would bias the log-dets by
//! `O(ridge / t)`, which is visible at the 1e-9 level.

use crate::channels::output_covariance;
use crate::error::{Error, Result};
use crate::math::linalg::symmetrize;
use crate::math::{cholesky, singular_values, Tensor};

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("noise variance must be positive, got {t}")))
    }
}

/// `½ log det(I + (σ_x²/t) A Aᵀ)` for `X ~ N(0, σ_x² I)`.
pub fn mi_closed_form_linear(a: &Tensor, sigma_x2: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    let mut m = a.matmul_t(a)?.scale(sigma_x2 / t);
    for i in 0..m.rows() {
        m.set(i, i, m.get(i, i) + 1.0);
    }
    Ok(0.5 * cholesky(&symmetrize(&m), 0.0)?.log_det())
}

/// `½ [log det(A Σ_x Aᵀ + t I) − m log t]` for a general input covariance.
pub fn mi_closed_form_general(a: &Tensor, sigma_x: &Tensor, t: f64) -> Result<f64> {
    check_t(t)?;
    let cov = output_covariance(a, sigma_x, t)?;
    Ok(0.5 * (cholesky(&cov, 0.0)?.log_det() - a.rows() as f64 * t.ln()))
}

/// `½ Σᵢ log(1 + σ_x² sᵢ² / t)` over the singular values of `A`.
pub fn mi_singular_value_sum(a: &Tensor, sigma_x2: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(singular_values(a)?.iter().map(|s| 0.5 * (sigma_x2 * s * s / t).ln_1p()).sum())
}

/// `d/dα I(X; αAX + Z) = Σᵢ α σ_x² sᵢ² / (t + α² σ_x² sᵢ²)`.
pub fn grad_alpha_closed_form(a: &Tensor, alpha: f64, sigma_x2: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(singular_values(a)?
        .iter()
        .map(|s| {
            let p = sigma_x2 * s * s;
            alpha * p / (t + alpha * alpha * p)
        })
        .sum())
}

/// Scalar channel `Y = αX + Z`: `½ log(1 + α² σ_x² / t)`.
pub fn mi_scalar(alpha: f64, sigma_x2: f64, t: f64) -> f64 {
    0.5 * (alpha * alpha * sigma_x2 / t).ln_1p()
}

/// Scalar channel gradient `α σ_x² / (t + α² σ_x²)`.
pub fn grad_scalar(alpha: f64, sigma_x2: f64, t: f64) -> f64 {
    alpha * sigma_x2 / (t + alpha * alpha * sigma_x2)
}

/// `I(T; Y)` for `T = W X`, `Y = A X + Z`, `X ~ N(0, Σ_x)`:
///
/// ```text
/// I(T; Y) = ½ [ log det Σ_Y − log det(Σ_Y − Σ_YT Σ_T⁻¹ Σ_TY) ]
/// ```
///
/// with `Σ_T = W Σ_x Wᵀ`, `Σ_Y = A Σ_x Aᵀ + t I` and `Σ_TY = W Σ_x Aᵀ`.
pub fn task_mi_closed_form(a: &Tensor, w: &Tensor, sigma_x: &Tensor, t: f64) -> Result<f64> {
    check_t(t)?;
    if w.rows() == 0 || w.data().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let sigma_y = output_covariance(a, sigma_x, t)?;
    let sigma_t = symmetrize(&w.matmul(sigma_x)?.matmul_t(w)?);
    let cross = w.matmul(sigma_x)?.matmul_t(a)?; // Σ_TY, k×m
    let ft = cholesky(&sigma_t, 0.0)?;
    let scale = (0..sigma_t.rows()).map(|i| sigma_t.get(i, i)).fold(0.0, f64::max);
    let lower = ft.lower();
    if let Some(i) = (0..lower.rows()).find(|&i| lower.get(i, i).powi(2) <= 1e-9 * scale) {
        // numerically rank-deficient W
        return Err(Error::NotPositiveDefinite { index: i, pivot: lower.get(i, i).powi(2) });
    }
    // Σ_YT Σ_T⁻¹ Σ_TY = VᵀV with V = L⁻¹ Σ_TY
    let mut v = cross.transpose();
    for r in 0..v.rows() {
        ft.forward_substitute(v.row_mut(r));
    }
    let explained = v.matmul_t(&v)?;
    let cond = symmetrize(&sigma_y.sub(&explained)?);
    Ok(0.5 * (cholesky(&sigma_y, 0.0)?.log_det() - cholesky(&cond, 0.0)?.log_det()))
}

/// `L_IB = I(T; Y) − β I(X; Y)` for the linear-Gaussian channel.
pub fn ib_closed_form(a: &Tensor, w: &Tensor, sigma_x: &Tensor, t: f64, beta: f64) -> Result<f64> {
    Ok(task_mi_closed_form(a, w, sigma_x, t)? - beta * mi_closed_form_general(a, sigma_x, t)?)
}

/// Largest `I(X; AX + Z)` over `‖A‖_F ≤ P`: `(m/2) log(1 + σ_x² P² / (t m))`.
pub fn optimum_mi_frobenius(m: usize, sigma_x2: f64, t: f64, p: f64) -> f64 {
    let mf = m as f64;
    0.5 * mf * (sigma_x2 * p * p / (t * mf)).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{sample_channel, FrontEnd, InputDistribution, TaskMap};
    use crate::math::linalg::{log_det_psd, sample_covariance, solve_psd};
    use crate::math::SeededRng;

    #[test]
    fn zero_matrix_gives_zero() {
        let a = Tensor::zeros(3, 3);
        assert_eq!(mi_closed_form_linear(&a, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(task_mi_closed_form(&a, &Tensor::identity(3), &Tensor::identity(3), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn scalar_value() {
        let a = Tensor::diag(&[1.0]);
        let v = mi_closed_form_linear(&a, 1.0, 0.5).unwrap();
        assert!((v - 0.5 * 3f64.ln()).abs() < 1e-12);
        assert!((v - 0.549306).abs() < 1e-6);
        assert!((mi_scalar(1.0, 1.0, 0.5) - v).abs() < 1e-15);
    }

    #[test]
    fn log_det_and_singular_value_forms_agree() {
        let mut rng = SeededRng::new(21);
        for _ in 0..5 {
            let a = rng.gaussian_tensor(8, 8, 1.0);
            let x = mi_closed_form_linear(&a, 1.3, 0.7).unwrap();
            let y = mi_singular_value_sum(&a, 1.3, 0.7).unwrap();
            let z = mi_closed_form_general(&a, &Tensor::identity(8).scale(1.3), 0.7).unwrap();
            assert!((x - y).abs() < 1e-10 && (x - z).abs() < 1e-10, "{x} {y} {z}");
        }
    }

    /// `tr((t I + α² σ² A Aᵀ)⁻¹ α σ² A Aᵀ)`
    fn grad_alpha_trace(a: &Tensor, alpha: f64, s2: f64, t: f64) -> f64 {
        let aat = a.matmul_t(a).unwrap();
        let mut m = aat.scale(alpha * alpha * s2);
        for i in 0..m.rows() {
            m.set(i, i, m.get(i, i) + t);
        }
        let f = cholesky(&symmetrize(&m), 0.0).unwrap();
        solve_psd(&f, &aat.scale(alpha * s2)).unwrap().trace()
    }

    #[test]
    fn gradient_sum_and_trace_forms_agree() {
        let mut rng = SeededRng::new(22);
        assert_eq!(grad_alpha_closed_form(&Tensor::identity(3), 0.0, 1.0, 0.5).unwrap(), 0.0);
        for _ in 0..5 {
            let a = rng.gaussian_tensor(6, 5, 1.0);
            let alpha = 0.1 + 2.0 * rng.uniform();
            let s = grad_alpha_closed_form(&a, alpha, 0.8, 0.5).unwrap();
            let tr = grad_alpha_trace(&a, alpha, 0.8, 0.5);
            assert!((s - tr).abs() < 1e-10, "{s} vs {tr}");
        }
    }

    #[test]
    fn scalar_gradient_peaks_at_sqrt_t() {
        let grid: Vec<f64> = (0..=3000).map(|i| i as f64 * 1e-3).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| grad_scalar(*a, 1.0, 0.5).total_cmp(&grad_scalar(*b, 1.0, 0.5)))
            .unwrap();
        assert!((best - 0.5f64.sqrt()).abs() < 2e-3, "peak at {best}");
    }

    #[test]
    fn optimum_values() {
        assert!(optimum_mi_frobenius(8, 1.0, 0.5, 1e-9) < 1e-15);
        let v = optimum_mi_frobenius(8, 1.0, 0.5, 5.0);
        assert!((v - 4.0 * 7.25f64.ln()).abs() < 1e-12);
        assert!((v - 7.9240).abs() < 1e-4);
        let a = Tensor::identity(8).scale(5.0 / 8f64.sqrt());
        assert!((mi_closed_form_linear(&a, 1.0, 0.5).unwrap() - v).abs() < 1e-9);
    }

    #[test]
    fn task_with_identity_is_full_mi() {
        let mut rng = SeededRng::new(23);
        for _ in 0..5 {
            let a = rng.gaussian_tensor(5, 5, 1.2);
            let full = mi_closed_form_linear(&a, 1.0, 0.5).unwrap();
            let task = task_mi_closed_form(&a, &Tensor::identity(5), &Tensor::identity(5), 0.5).unwrap();
            assert!((full - task).abs() < 1e-9, "{full} vs {task}");
        }
    }

    #[test]
    fn scalar_task_is_minus_half_log_one_minus_rho_squared() {
        // T = X, Y = X + Z with t = 1: ρ² = 1/2, I = ½ log 2
        let one = Tensor::identity(1);
        let v = task_mi_closed_form(&one, &one, &one, 1.0).unwrap();
        assert!((v - 0.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn task_mi_matches_sample_entropy_route() {
        let mut rng = SeededRng::new(24);
        let (n, k, t) = (6, 3, 0.5);
        let a = rng.gaussian_tensor(n, n, 0.5);
        let w = rng.gaussian_tensor(k, n, 1.0);
        let exact = task_mi_closed_form(&a, &w, &Tensor::identity(n), t).unwrap();
        let fe = FrontEnd::linear_matrix(&a);
        let dist = InputDistribution::isotropic(1.0, n).unwrap();
        let batch = sample_channel(&fe, &dist, t, 200_000, &mut rng, Some(&TaskMap::new(w).unwrap())).unwrap();
        let tau = batch.tau.unwrap();
        let joint = tau.hconcat(&batch.y).unwrap();
        // Gaussian entropies: I = ½ [log det Ĉ_T + log det Ĉ_Y − log det Ĉ_(T,Y)]
        let ld = |s: &Tensor| log_det_psd(&sample_covariance(s).1, 0.0).unwrap();
        let mc = 0.5 * (ld(&tau) + ld(&batch.y) - ld(&joint));
        assert!((mc - exact).abs() / exact < 0.02, "{mc} vs {exact}");
    }

    #[test]
    fn row_deficient_task_is_rejected() {
        let w = Tensor::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let r = task_mi_closed_form(&Tensor::identity(2), &w, &Tensor::identity(2), 0.5);
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })), "{r:?}");
    }
}
