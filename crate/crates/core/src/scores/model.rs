//! Score models: closed-form Gaussian and mixture scores, learned MLP scores.

use crate::channels::{output_covariance, FrontEnd, InputDistribution, MixtureComponent};
use crate::error::{Error, Result};
use crate::math::linalg::symmetrize;
use crate::math::{cholesky, pairwise_sum, PsdFactor, Tensor, ORACLE_RIDGE};

use super::mlp::MlpNet;

/// Score of `Y_t = A X + b + Z_t` for a Gaussian-mixture input.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureScore {
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    factors: Vec<PsdFactor>,
}

impl MixtureScore {
    pub fn new(components: &[MixtureComponent], a: &Tensor, b: &[f64], t: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ConfigInvalid("mixture has no components".into()));
        }
        if b.len() != a.rows() {
            return Err(Error::ShapeMismatch("offset length must equal output dim".into()));
        }
        let mut log_weights = Vec::new();
        let mut means = Vec::new();
        let mut factors = Vec::new();
        for c in components {
            let mu = Tensor::column(&c.mean)?;
            let mean: Vec<f64> = a.matmul(&mu)?.data().iter().zip(b).map(|(v, o)| v + o).collect();
            factors.push(cholesky(&output_covariance(a, &c.cov, t)?, ORACLE_RIDGE)?);
            means.push(mean);
            log_weights.push(c.weight.ln());
        }
        Ok(Self { log_weights, means, factors })
    }

    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn eval_row(&self, y: &[f64], out: &mut [f64]) {
        let m = y.len() as f64;
        let k = self.means.len();
        let mut solved = Vec::with_capacity(k);
        let mut logits = Vec::with_capacity(k);
        for ((mean, factor), lw) in self.means.iter().zip(&self.factors).zip(&self.log_weights) {
            let mut u: Vec<f64> = y.iter().zip(mean).map(|(a, b)| a - b).collect();
            let d = u.clone();
            factor.solve_in_place(&mut u);
            let quad: f64 = d.iter().zip(&u).map(|(a, b)| a * b).sum();
            logits.push(lw - 0.5 * quad - 0.5 * factor.log_det() - 0.5 * m * (2.0 * std::f64::consts::PI).ln());
            solved.push(u);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let expd: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = expd.iter().sum();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (e, u) in expd.iter().zip(&solved) {
            let gamma = e / total;
            for (o, ui) in out.iter_mut().zip(u) {
                *o += gamma * (-ui);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreKind {
    /// `−Σ⁻¹(y − b)`.
    AnalyticGaussian { factor: PsdFactor, mean: Vec<f64> },
    GaussianMixture(MixtureScore),
    /// `−(y − f(x))/t`; the conditioning input is `x` itself (`T = X`).
    ConditionalGivenX { t: f64, front_end: FrontEnd },
    /// `−C⁻¹(y − Gτ)` for jointly Gaussian `(T, Y)` with `E[Y|T=τ] = Gτ`.
    ConditionalGaussian { factor: PsdFactor, gain: Tensor },
    Mlp(MlpNet),
    /// MLP on the concatenated input `[y; τ]`.
    ConditionalMlp { net: MlpNet, cond_dim: usize },
}

/// A frozen vector field approximating `∇_y log p(y)` (or `∇_y log p(y|τ)`),
/// multiplied by a calibration factor `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    kind: ScoreKind,
    calibration: f64,
}

impl ScoreModel {
    pub fn new(kind: ScoreKind) -> Self {
        Self { kind, calibration: 1.0 }
    }

    pub fn analytic_gaussian(cov: &Tensor, mean: &[f64]) -> Result<Self> {
        if mean.len() != cov.rows() {
            return Err(Error::ShapeMismatch("mean length must equal covariance dim".into()));
        }
        let factor = cholesky(cov, ORACLE_RIDGE)?;
        Ok(Self::new(ScoreKind::AnalyticGaussian { factor, mean: mean.to_vec() }))
    }

    /// Exact marginal score of `Y = A X + Z`, `X ~ N(0, Σ_x)`, `Z ~ N(0, tI)`.
    pub fn linear_gaussian(a: &Tensor, sigma_x: &Tensor, t: f64) -> Result<Self> {
        let cov = output_covariance(a, sigma_x, t)?;
        Self::analytic_gaussian(&cov, &vec![0.0; a.rows()])
    }

    /// Exact marginal score of a linear front-end driven by `dist`.
    pub fn exact_for(fe: &FrontEnd, dist: &InputDistribution, t: f64) -> Result<Self> {
        let a = fe
            .linear_map()
            .ok_or_else(|| Error::ConfigInvalid("exact score needs a linear front-end".into()))?;
        match dist {
            InputDistribution::IsotropicGaussian { .. } => Self::linear_gaussian(&a, &dist.covariance(), t),
            InputDistribution::GaussianMixture { components, .. } => {
                Self::gaussian_mixture(components, &a, &vec![0.0; a.rows()], t)
            }
        }
    }

    pub fn gaussian_mixture(components: &[MixtureComponent], a: &Tensor, b: &[f64], t: f64) -> Result<Self> {
        Ok(Self::new(ScoreKind::GaussianMixture(MixtureScore::new(components, a, b, t)?)))
    }

    pub fn conditional_given_x(front_end: FrontEnd, t: f64) -> Self {
        Self::new(ScoreKind::ConditionalGivenX { t, front_end })
    }

    /// Exact `s_{Y|T}` for `Y = A X + Z`, `T = W X`, `X ~ N(0, Σ_x)`.
    ///
    /// `Σ_T` is factored with the oracle ridge, so `W = 0` yields gain `0`
    /// and conditional covariance `Σ_Y`.
    pub fn conditional_linear_gaussian(a: &Tensor, w: &Tensor, sigma_x: &Tensor, t: f64) -> Result<Self> {
        let sigma_y = output_covariance(a, sigma_x, t)?;
        let sigma_t = symmetrize(&w.matmul(sigma_x)?.matmul_t(w)?);
        let sigma_ty = w.matmul(sigma_x)?.matmul_t(a)?;
        let t_factor = cholesky(&sigma_t, ORACLE_RIDGE)?;
        // G = Σ_YT Σ_T⁻¹ = (Σ_T⁻¹ Σ_TY)ᵀ
        let gain = crate::math::solve_psd(&t_factor, &sigma_ty)?.transpose();
        let explained = gain.matmul(&sigma_ty)?;
        let cond_cov = symmetrize(&sigma_y.sub(&explained)?);
        let factor = cholesky(&cond_cov, ORACLE_RIDGE)?;
        Ok(Self::new(ScoreKind::ConditionalGaussian { factor, gain }))
    }

    pub fn mlp(net: MlpNet) -> Self {
        Self::new(ScoreKind::Mlp(net))
    }

    pub fn conditional_mlp(net: MlpNet, cond_dim: usize) -> Result<Self> {
        if net.input_dim() <= cond_dim || net.input_dim() - cond_dim != net.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "conditional net input {} must equal output {} + cond dim {cond_dim}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(Self::new(ScoreKind::ConditionalMlp { net, cond_dim }))
    }

    pub fn kind(&self) -> &ScoreKind {
        &self.kind
    }

    pub fn calibration(&self) -> f64 {
        self.calibration
    }

    pub fn set_calibration(&mut self, c: f64) -> Result<()> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidCalibration(c));
        }
        self.calibration = c;
        Ok(())
    }

    pub fn is_conditional(&self) -> bool {
        matches!(
            self.kind,
            ScoreKind::ConditionalGivenX { .. } | ScoreKind::ConditionalGaussian { .. } | ScoreKind::ConditionalMlp { .. }
        )
    }

    pub fn is_learned(&self) -> bool {
        matches!(self.kind, ScoreKind::Mlp(_) | ScoreKind::ConditionalMlp { .. })
    }

    pub fn net(&self) -> Option<&MlpNet> {
        match &self.kind {
            ScoreKind::Mlp(net) | ScoreKind::ConditionalMlp { net, .. } => Some(net),
            _ => None,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            ScoreKind::AnalyticGaussian { mean, .. } => mean.len(),
            ScoreKind::GaussianMixture(mix) => mix.dim(),
            ScoreKind::ConditionalGivenX { front_end, .. } => front_end.output_dim(),
            ScoreKind::ConditionalGaussian { factor, .. } => factor.dim(),
            ScoreKind::Mlp(net) | ScoreKind::ConditionalMlp { net, .. } => net.output_dim(),
        }
    }

    /// `c · s(y [, τ])` row-wise.
    pub fn eval(&self, y: &Tensor, tau: Option<&Tensor>) -> Result<Tensor> {
        let raw = self.eval_raw(y, tau)?;
        Ok(if self.calibration == 1.0 { raw } else { raw.scale(self.calibration) })
    }

    /// Score without the calibration factor.
    pub fn eval_raw(&self, y: &Tensor, tau: Option<&Tensor>) -> Result<Tensor> {
        if y.cols() != self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "score dim {} but batch has {} columns",
                self.output_dim(),
                y.cols()
            )));
        }
        let cond = if self.is_conditional() {
            let tau = tau.ok_or(Error::MissingCondition)?;
            if tau.rows() != y.rows() {
                return Err(Error::ShapeMismatch("condition and output batches differ in length".into()));
            }
            Some(tau)
        } else {
            None
        };
        match &self.kind {
            ScoreKind::AnalyticGaussian { factor, mean } => {
                let mut out = y.clone();
                for r in 0..out.rows() {
                    let row = out.row_mut(r);
                    row.iter_mut().zip(mean).for_each(|(v, b)| *v -= b);
                    factor.solve_in_place(row);
                    row.iter_mut().for_each(|v| *v = -*v);
                }
                Ok(out)
            }
            ScoreKind::GaussianMixture(mix) => {
                let mut out = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    mix.eval_row(y.row(r), out.row_mut(r));
                }
                Ok(out)
            }
            ScoreKind::ConditionalGivenX { t, front_end } => {
                let mean = front_end.forward(cond.expect("checked"))?;
                Ok(mean.sub(y)?.scale(1.0 / t))
            }
            ScoreKind::ConditionalGaussian { factor, gain } => {
                let tau = cond.expect("checked");
                if tau.cols() != gain.cols() {
                    return Err(Error::ShapeMismatch("condition dim does not match gain".into()));
                }
                let mean = tau.matmul_t(gain)?;
                let diff = mean.sub(y)?;
                factor.solve_rows(&diff)
            }
            ScoreKind::Mlp(net) => net.forward(y),
            ScoreKind::ConditionalMlp { net, cond_dim } => {
                let tau = cond.expect("checked");
                if tau.cols() != *cond_dim {
                    return Err(Error::ShapeMismatch("condition dim does not match net".into()));
                }
                net.forward(&y.hconcat(tau)?)
            }
        }
    }
}

/// Sets `c = −m / mean(yᵢᵀ s_raw(yᵢ))` from the Gaussian Stein identity and returns it.
pub fn stein_calibrate(model: &mut ScoreModel, y: &Tensor, tau: Option<&Tensor>) -> Result<f64> {
    if y.rows() < 100 {
        return Err(Error::DegenerateSample(format!(
            "Stein calibration needs at least 100 samples, got {}",
            y.rows()
        )));
    }
    let s = model.eval_raw(y, tau)?;
    let inner: Vec<f64> = (0..y.rows())
        .map(|i| y.row(i).iter().zip(s.row(i)).map(|(a, b)| a * b).sum())
        .collect();
    let mean = pairwise_sum(&inner) / y.rows() as f64;
    if mean.abs() < 1e-8 {
        return Err(Error::DegenerateDenominator(mean));
    }
    let c = -(y.cols() as f64) / mean;
    model.set_calibration(c)?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::sample_channel;
    use crate::math::SeededRng;

    #[test]
    fn analytic_gaussian_example() {
        let s = ScoreModel::analytic_gaussian(&Tensor::identity(2), &[0.0, 0.0]).unwrap();
        let out = s.eval(&Tensor::row_vector(&[2.0, -1.0]).unwrap(), None).unwrap();
        assert!((out.get(0, 0) + 2.0).abs() < 1e-9 && (out.get(0, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_component_mixture_reduces_to_gaussian() {
        let sigma2 = 0.7;
        let t = 0.4;
        let comp = MixtureComponent { weight: 1.0, mean: vec![0.0; 3], cov: Tensor::identity(3).scale(sigma2) };
        let mix = ScoreModel::gaussian_mixture(&[comp], &Tensor::identity(3), &[0.0; 3], t).unwrap();
        let y = SeededRng::new(1).gaussian_tensor(20, 3, 1.0);
        let got = mix.eval(&y, None).unwrap();
        let expect = y.scale(-1.0 / (sigma2 + t));
        assert!(got.sub(&expect).unwrap().max_abs() < 1e-9);

        let gauss = ScoreModel::linear_gaussian(&Tensor::identity(3), &Tensor::identity(3).scale(sigma2), t).unwrap();
        let g2 = gauss.eval(&y, None).unwrap();
        assert!(got.sub(&g2).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn mixture_score_matches_numerical_log_density_gradient() {
        let comps = vec![
            MixtureComponent { weight: 0.4, mean: vec![-1.0, 0.5], cov: Tensor::identity(2).scale(0.3) },
            MixtureComponent { weight: 0.6, mean: vec![1.5, -0.5], cov: Tensor::diag(&[0.8, 0.2]) },
        ];
        let a = Tensor::from_rows(&[vec![1.0, 0.3], vec![-0.2, 0.9]]).unwrap();
        let b = [0.1, -0.2];
        let t = 0.25;
        let model = ScoreModel::gaussian_mixture(&comps, &a, &b, t).unwrap();
        let log_density = |y: &[f64]| -> f64 {
            comps
                .iter()
                .map(|c| {
                    let mu = a.matmul(&Tensor::column(&c.mean).unwrap()).unwrap();
                    let cov = output_covariance(&a, &c.cov, t).unwrap();
                    let f = cholesky(&cov, 0.0).unwrap();
                    let mut d: Vec<f64> = (0..2).map(|i| y[i] - mu.get(i, 0) - b[i]).collect();
                    let dd = d.clone();
                    f.solve_in_place(&mut d);
                    let q: f64 = d.iter().zip(&dd).map(|(p, r)| p * r).sum();
                    c.weight * (-0.5 * q - 0.5 * f.log_det()).exp() / (2.0 * std::f64::consts::PI)
                })
                .sum::<f64>()
                .ln()
        };
        let y = [0.4, -0.3];
        let s = model.eval(&Tensor::row_vector(&y).unwrap(), None).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut p = y;
            p[j] += h;
            let mut m = y;
            m[j] -= h;
            let fd = (log_density(&p) - log_density(&m)) / (2.0 * h);
            assert!((s.get(0, j) - fd).abs() < 1e-6, "coord {j}: {} vs {fd}", s.get(0, j));
        }
    }

    #[test]
    fn conditional_given_x_is_negative_noise_over_t() {
        let mut rng = SeededRng::new(2);
        let a = rng.gaussian_tensor(3, 3, 1.0);
        let fe = FrontEnd::linear_matrix(&a);
        let dist = InputDistribution::isotropic(1.0, 3).unwrap();
        let b = sample_channel(&fe, &dist, 0.5, 50, &mut rng, None).unwrap();
        let s = ScoreModel::conditional_given_x(fe, 0.5);
        let out = s.eval(&b.y, Some(&b.x)).unwrap();
        assert!(out.sub(&b.z.scale(-2.0)).unwrap().max_abs() < 1e-12);
        assert_eq!(s.eval(&b.y, None), Err(Error::MissingCondition));
    }

    #[test]
    fn conditional_linear_gaussian_with_identity_task() {
        let mut rng = SeededRng::new(3);
        let a = rng.gaussian_tensor(3, 3, 1.0);
        let sx = Tensor::identity(3);
        let t = 0.5;
        let cond = ScoreModel::conditional_linear_gaussian(&a, &Tensor::identity(3), &sx, t).unwrap();
        let given_x = ScoreModel::conditional_given_x(FrontEnd::linear_matrix(&a), t);
        let y = rng.gaussian_tensor(10, 3, 1.0);
        let x = rng.gaussian_tensor(10, 3, 1.0);
        let d = cond.eval(&y, Some(&x)).unwrap().sub(&given_x.eval(&y, Some(&x)).unwrap()).unwrap();
        assert!(d.max_abs() < 1e-7);
    }

    #[test]
    fn stein_examples() {
        let mut rng = SeededRng::new(4);
        let cov = Tensor::diag(&[2.0, 0.5, 1.0]);
        let l = cholesky(&cov, 0.0).unwrap();
        let y = rng.gaussian_tensor(100_000, 3, 1.0).matmul_t(l.lower()).unwrap();
        let mut exact = ScoreModel::analytic_gaussian(&cov, &[0.0; 3]).unwrap();
        let c = stein_calibrate(&mut exact, &y, None).unwrap();
        assert!((c - 1.0).abs() < 0.03, "c = {c}");
        assert_eq!(exact.calibration(), c);

        let mut doubled = ScoreModel::analytic_gaussian(&cov.scale(0.5), &[0.0; 3]).unwrap();
        let c2 = stein_calibrate(&mut doubled, &y, None).unwrap();
        assert!((c2 - 0.5 * c).abs() < 1e-9);

        let mut zero = ScoreModel::mlp(MlpNet::zeros(&[3, 4, 3]).unwrap());
        assert!(matches!(stein_calibrate(&mut zero, &y, None), Err(Error::DegenerateDenominator(_))));
        assert!(stein_calibrate(&mut exact, &Tensor::zeros(10, 3), None).is_err());
    }

    #[test]
    fn conditional_mlp_shape_rules() {
        let net = MlpNet::zeros(&[5, 4, 3]).unwrap();
        assert!(ScoreModel::conditional_mlp(net.clone(), 2).is_ok());
        assert!(ScoreModel::conditional_mlp(net, 1).is_err());
    }
}
