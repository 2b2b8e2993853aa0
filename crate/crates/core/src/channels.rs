//! Parametric front-ends, input laws, task maps and the Gaussian channel.
//!
//! Parameter layout: scalar kinds carry `[α]`; matrix kinds carry the `m×n`
//! matrix `A` flattened row-major, so `η[i·n + j] = A[i][j]`.

use crate::error::{Error, Result};
use crate::math::linalg::qr_orthogonal;
use crate::math::{cholesky, frobenius_project, mean_and_stderr, PsdFactor, SeededRng, Tensor, ORACLE_RIDGE};

#[derive(Debug, Clone, PartialEq)]
pub enum FrontEndKind {
    /// `f(x) = α x`, `n = m`.
    ScalarGain,
    /// `f(x) = α A x` with `A` fixed.
    ScaledFixedLinear { a: Tensor },
    /// `f(x) = A x`, every entry of `A` a parameter.
    LinearMatrix,
    /// `f(x) = tanh(A x)` elementwise.
    TanhLinear,
}

/// A front-end `f_η: R^n → R^m` with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    kind: FrontEndKind,
    params: Vec<f64>,
    input_dim: usize,
    output_dim: usize,
}

impl FrontEnd {
    pub fn scalar_gain(alpha: f64, dim: usize) -> Self {
        Self { kind: FrontEndKind::ScalarGain, params: vec![alpha], input_dim: dim, output_dim: dim }
    }

    pub fn scaled_fixed_linear(alpha: f64, a: Tensor) -> Self {
        let (m, n) = a.shape();
        Self {
            kind: FrontEndKind::ScaledFixedLinear { a },
            params: vec![alpha],
            input_dim: n,
            output_dim: m,
        }
    }

    pub fn linear_matrix(a: &Tensor) -> Self {
        Self {
            kind: FrontEndKind::LinearMatrix,
            params: a.data().to_vec(),
            input_dim: a.cols(),
            output_dim: a.rows(),
        }
    }

    pub fn tanh_linear(a: &Tensor) -> Self {
        Self {
            kind: FrontEndKind::TanhLinear,
            params: a.data().to_vec(),
            input_dim: a.cols(),
            output_dim: a.rows(),
        }
    }

    pub fn kind(&self) -> &FrontEndKind {
        &self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn is_matrix_kind(&self) -> bool {
        matches!(self.kind, FrontEndKind::LinearMatrix | FrontEndKind::TanhLinear)
    }

    /// Same kind with a new parameter vector.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "front-end expects {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("front-end parameters".into()));
        }
        Ok(Self { params, ..self.clone() })
    }

    /// Parameters as an `m×n` matrix (matrix kinds) or `1×1` (scalar kinds).
    pub fn params_tensor(&self) -> Tensor {
        if self.is_matrix_kind() {
            Tensor::from_raw(self.output_dim, self.input_dim, self.params.clone())
        } else {
            Tensor::from_raw(1, 1, self.params.clone())
        }
    }

    /// Effective linear map of the linear kinds (`αI`, `αA` or `A`); `None` for tanh.
    pub fn linear_map(&self) -> Option<Tensor> {
        match &self.kind {
            FrontEndKind::ScalarGain => Some(Tensor::identity(self.input_dim).scale(self.params[0])),
            FrontEndKind::ScaledFixedLinear { a } => Some(a.scale(self.params[0])),
            FrontEndKind::LinearMatrix => Some(self.params_tensor()),
            FrontEndKind::TanhLinear => None,
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "front-end input dim {} but batch has {} columns",
                self.input_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Row-wise `f_η(x)` for a `B×n` batch.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let alpha = self.params[0];
        match &self.kind {
            FrontEndKind::ScalarGain => Ok(x.scale(alpha)),
            FrontEndKind::ScaledFixedLinear { a } => Ok(x.matmul_t(a)?.scale(alpha)),
            FrontEndKind::LinearMatrix => x.matmul_t(&self.params_tensor()),
            FrontEndKind::TanhLinear => Ok(x.matmul_t(&self.params_tensor())?.map(f64::tanh)),
        }
    }

    /// `∇_η ⟨f_η(x), v⟩ = Df_η(x)ᵀ v` for a single sample (`x` of length n, `v` of length m).
    pub fn param_vjp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let xt = Tensor::new(1, x.len(), x.to_vec())?;
        let vt = Tensor::new(1, v.len(), v.to_vec())?;
        let (per_sample, _) = self.vjp_contributions(&xt, &vt)?;
        Ok(per_sample)
    }

    /// Mean and per-coordinate standard error of `Df_η(xᵢ)ᵀ vᵢ` over a batch.
    pub fn batch_param_vjp(&self, x: &Tensor, v: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        self.vjp_contributions(x, v)
    }

    fn vjp_contributions(&self, x: &Tensor, v: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        if v.cols() != self.output_dim || v.rows() != x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "vjp cotangent {:?} vs inputs {:?} (output dim {})",
                v.shape(),
                x.shape(),
                self.output_dim
            )));
        }
        let b = x.rows();
        match &self.kind {
            FrontEndKind::ScalarGain => {
                let per: Vec<f64> = (0..b)
                    .map(|i| x.row(i).iter().zip(v.row(i)).map(|(a, c)| a * c).sum())
                    .collect();
                let (mean, se) = mean_and_stderr(&per);
                Ok((vec![mean], vec![se]))
            }
            FrontEndKind::ScaledFixedLinear { a } => {
                let ax = x.matmul_t(a)?;
                let per: Vec<f64> = (0..b)
                    .map(|i| ax.row(i).iter().zip(v.row(i)).map(|(p, c)| p * c).sum())
                    .collect();
                let (mean, se) = mean_and_stderr(&per);
                Ok((vec![mean], vec![se]))
            }
            FrontEndKind::LinearMatrix => Ok(outer_mean_and_stderr(v, x)),
            FrontEndKind::TanhLinear => {
                let pre = x.matmul_t(&self.params_tensor())?;
                let gated = pre
                    .map(|u| {
                        let th = u.tanh();
                        1.0 - th * th
                    })
                    .hadamard(v)?;
                Ok(outer_mean_and_stderr(&gated, x))
            }
        }
    }
}

/// Mean of `vᵢ xᵢᵀ` (flattened row-major `m×n`) and the per-entry standard error.
fn outer_mean_and_stderr(v: &Tensor, x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let b = x.rows();
    let bf = b as f64;
    let mean = v.t_matmul(x).expect("batch rows agree").scale(1.0 / bf);
    if b < 2 {
        let len = mean.len();
        return (mean.into_data(), vec![0.0; len]);
    }
    let v2 = v.map(|a| a * a);
    let x2 = x.map(|a| a * a);
    let mean_sq = v2.t_matmul(&x2).expect("batch rows agree").scale(1.0 / bf);
    let se = mean
        .data()
        .iter()
        .zip(mean_sq.data())
        .map(|(mu, sq)| ((sq - mu * mu).max(0.0) * bf / (bf - 1.0) / bf).sqrt())
        .collect();
    (mean.into_data(), se)
}

/// One component of a Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputDistribution {
    IsotropicGaussian { sigma: f64, dim: usize },
    GaussianMixture { components: Vec<MixtureComponent>, factors: Vec<PsdFactor> },
}

impl InputDistribution {
    pub fn isotropic(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::ConfigInvalid(format!("sigma_x must be positive, got {sigma}")));
        }
        Ok(Self::IsotropicGaussian { sigma, dim })
    }

    pub fn mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        let dim = components
            .first()
            .map(|c| c.mean.len())
            .ok_or_else(|| Error::ConfigInvalid("mixture has no components".into()))?;
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| !(c.weight > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::ConfigInvalid("mixture weights must be positive and sum to 1".into()));
        }
        let mut factors = Vec::with_capacity(components.len());
        for c in &components {
            if c.mean.len() != dim || c.cov.shape() != (dim, dim) {
                return Err(Error::ShapeMismatch("mixture component dimensions disagree".into()));
            }
            factors.push(cholesky(&c.cov, 0.0)?);
        }
        Ok(Self::GaussianMixture { components, factors })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::IsotropicGaussian { dim, .. } => *dim,
            Self::GaussianMixture { components, .. } => components[0].mean.len(),
        }
    }

    /// Covariance `Σ_x` of the law (mixture: law of total covariance).
    pub fn covariance(&self) -> Tensor {
        match self {
            Self::IsotropicGaussian { sigma, dim } => Tensor::identity(*dim).scale(sigma * sigma),
            Self::GaussianMixture { components, .. } => {
                let d = self.dim();
                let mut mean = vec![0.0; d];
                for c in components {
                    for (m, v) in mean.iter_mut().zip(&c.mean) {
                        *m += c.weight * v;
                    }
                }
                let mut cov = Tensor::zeros(d, d);
                for c in components {
                    for i in 0..d {
                        for j in 0..d {
                            let di = c.mean[i] - mean[i];
                            let dj = c.mean[j] - mean[j];
                            let v = cov.get(i, j) + c.weight * (c.cov.get(i, j) + di * dj);
                            cov.set(i, j, v);
                        }
                    }
                }
                cov
            }
        }
    }

    pub fn sample(&self, batch: usize, rng: &mut SeededRng) -> Tensor {
        match self {
            Self::IsotropicGaussian { sigma, dim } => rng.gaussian_tensor(batch, *dim, *sigma),
            Self::GaussianMixture { components, factors } => {
                let d = self.dim();
                let mut out = Tensor::zeros(batch, d);
                for r in 0..batch {
                    let u = rng.uniform();
                    let mut acc = 0.0;
                    let mut k = components.len() - 1;
                    for (idx, c) in components.iter().enumerate() {
                        acc += c.weight;
                        if u < acc {
                            k = idx;
                            break;
                        }
                    }
                    let eps: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
                    let l = factors[k].lower();
                    let row = out.row_mut(r);
                    for i in 0..d {
                        let s: f64 = (0..=i).map(|j| l.get(i, j) * eps[j]).sum();
                        row[i] = components[k].mean[i] + s;
                    }
                }
                out
            }
        }
    }
}

/// Deterministic linear task `T = W X`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMap {
    w: Tensor,
}

impl TaskMap {
    pub fn new(w: Tensor) -> Result<Self> {
        if w.rows() > w.cols() {
            return Err(Error::ShapeMismatch(format!(
                "task map must have k ≤ n, got {:?}",
                w.shape()
            )));
        }
        Ok(Self { w })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.w
    }

    pub fn task_dim(&self) -> usize {
        self.w.rows()
    }

    /// `τ = x Wᵀ` row-wise.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul_t(&self.w)
    }
}

/// Paired channel draws at noise variance `t`; `y = w + z` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBatch {
    pub x: Tensor,
    pub w: Tensor,
    pub z: Tensor,
    pub y: Tensor,
    pub tau: Option<Tensor>,
    pub t: f64,
}

impl ChannelBatch {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }
}

/// Draws `x ~ dist`, `z ~ N(0, tI)`, and forms `y = f_η(x) + z` (and `τ = Wx`).
pub fn sample_channel(
    fe: &FrontEnd,
    dist: &InputDistribution,
    t: f64,
    batch: usize,
    rng: &mut SeededRng,
    task: Option<&TaskMap>,
) -> Result<ChannelBatch> {
    if !(t > 0.0) {
        return Err(Error::ConfigInvalid(format!("noise variance must be positive, got {t}")));
    }
    if dist.dim() != fe.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input law dim {} vs front-end input dim {}",
            dist.dim(),
            fe.input_dim()
        )));
    }
    let x = dist.sample(batch, rng);
    let z = rng.gaussian_tensor(batch, fe.output_dim(), t.sqrt());
    let w = fe.forward(&x)?;
    let y = w.add(&z)?;
    let tau = task.map(|tm| tm.apply(&x)).transpose()?;
    Ok(ChannelBatch { x, w, z, y, tau, t })
}

/// Factors of a synthetic test matrix `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct TestMatrix {
    pub a: Tensor,
    pub u: Tensor,
    pub singular_values: Vec<f64>,
    pub v: Tensor,
}

/// `m×n` matrix with orthogonal factors from QR of Gaussian matrices and a
/// geometric spectrum of ratio `cond_ratio`, scaled to `‖A‖_F = √m`.
pub fn test_matrix_factors(n: usize, m: usize, cond_ratio: f64, rng: &mut SeededRng) -> TestMatrix {
    assert!(cond_ratio >= 1.0, "cond_ratio must be ≥ 1");
    let u = qr_orthogonal(&rng.gaussian_tensor(m, m, 1.0));
    let v = qr_orthogonal(&rng.gaussian_tensor(n, n, 1.0));
    let r = m.min(n);
    let mut s: Vec<f64> = (0..r)
        .map(|i| if r > 1 { cond_ratio.powf(-(i as f64) / (r - 1) as f64) } else { 1.0 })
        .collect();
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = (m as f64).sqrt();
    s.iter_mut().for_each(|v| *v *= target / norm);
    let mut a = Tensor::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let val: f64 = (0..r).map(|k| u.get(i, k) * s[k] * v.get(j, k)).sum();
            a.set(i, j, val);
        }
    }
    TestMatrix { a, u, singular_values: s, v }
}

pub fn generate_test_matrix(n: usize, m: usize, cond_ratio: f64, rng: &mut SeededRng) -> Tensor {
    test_matrix_factors(n, m, cond_ratio, rng).a
}

/// Gaussian matrix rescaled to Frobenius norm `radius`.
pub fn random_matrix_on_sphere(m: usize, n: usize, radius: f64, rng: &mut SeededRng) -> Tensor {
    let g = rng.gaussian_tensor(m, n, 1.0);
    let norm = g.frobenius_norm();
    // scaling up can overshoot by an ulp; the projection trims it back onto the ball
    frobenius_project(&g.scale(radius / norm), radius)
}

/// Covariance `Cov(Y) = A Σ_x Aᵀ + tI` of a linear channel.
pub fn output_covariance(a: &Tensor, sigma_x: &Tensor, t: f64) -> Result<Tensor> {
    let mut cov = a.matmul(sigma_x)?.matmul_t(a)?;
    for i in 0..cov.rows() {
        cov.set(i, i, cov.get(i, i) + t);
    }
    Ok(crate::math::linalg::symmetrize(&cov))
}

/// Factor of `Cov(Y)` for linear front-ends.
pub fn output_covariance_factor(a: &Tensor, sigma_x: &Tensor, t: f64) -> Result<PsdFactor> {
    cholesky(&output_covariance(a, sigma_x, t)?, ORACLE_RIDGE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_front_ends(rng: &mut SeededRng) -> Vec<FrontEnd> {
        let (n, m) = (3, 4);
        let a = rng.gaussian_tensor(m, n, 0.7);
        let fixed = rng.gaussian_tensor(m, n, 1.0);
        vec![
            FrontEnd::scalar_gain(rng.standard_normal(), n),
            FrontEnd::scaled_fixed_linear(rng.standard_normal(), fixed),
            FrontEnd::linear_matrix(&a),
            FrontEnd::tanh_linear(&a),
        ]
    }

    fn inner(fe: &FrontEnd, x: &[f64], v: &[f64]) -> f64 {
        let xt = Tensor::row_vector(x).unwrap();
        fe.forward(&xt).unwrap().row(0).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn forward_examples() {
        let x = Tensor::from_rows(&[vec![0.5, -1.0], vec![2.0, 3.0]]).unwrap();
        assert!(FrontEnd::scalar_gain(0.0, 2).forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(FrontEnd::linear_matrix(&Tensor::identity(2)).forward(&x).unwrap(), x);
        let t = FrontEnd::tanh_linear(&Tensor::identity(3))
            .forward(&Tensor::row_vector(&[0.5, 0.5, 0.5]).unwrap())
            .unwrap();
        assert!(t.data().iter().all(|v| (v - 0.462117).abs() < 1e-6));
        assert!(FrontEnd::linear_matrix(&Tensor::identity(3)).forward(&x).is_err());
    }

    #[test]
    fn vjp_examples() {
        let fe = FrontEnd::scalar_gain(0.3, 4);
        assert_eq!(fe.param_vjp(&[1.0; 4], &[1.0; 4]).unwrap(), vec![4.0]);
        let fe = FrontEnd::linear_matrix(&Tensor::identity(2));
        assert_eq!(fe.param_vjp(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert!(fe.param_vjp(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn vjp_matches_central_differences() {
        let mut rng = SeededRng::new(77);
        let h = 1e-5;
        for trial in 0..20 {
            for fe in random_front_ends(&mut rng) {
                let x: Vec<f64> = (0..fe.input_dim()).map(|_| rng.standard_normal()).collect();
                let v: Vec<f64> = (0..fe.output_dim()).map(|_| rng.standard_normal()).collect();
                let g = fe.param_vjp(&x, &v).unwrap();
                let fd: Vec<f64> = (0..fe.num_params())
                    .map(|j| {
                        let mut p = fe.params().to_vec();
                        p[j] += h;
                        let up = inner(&fe.with_params(p.clone()).unwrap(), &x, &v);
                        p[j] -= 2.0 * h;
                        let dn = inner(&fe.with_params(p).unwrap(), &x, &v);
                        (up - dn) / (2.0 * h)
                    })
                    .collect();
                let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = fd.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
                assert!(diff / norm <= 1e-6, "trial {trial} {:?}: rel err {}", fe.kind(), diff / norm);
            }
        }
    }

    #[test]
    fn batched_vjp_is_mean_of_per_sample() {
        let mut rng = SeededRng::new(8);
        for fe in random_front_ends(&mut rng) {
            let x = rng.gaussian_tensor(7, fe.input_dim(), 1.0);
            let v = rng.gaussian_tensor(7, fe.output_dim(), 1.0);
            let (mean, se) = fe.batch_param_vjp(&x, &v).unwrap();
            let mut acc = vec![0.0; fe.num_params()];
            for i in 0..7 {
                let g = fe.param_vjp(x.row(i), v.row(i)).unwrap();
                acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b / 7.0);
            }
            for (a, b) in mean.iter().zip(&acc) {
                assert!((a - b).abs() <= 1e-12, "{:?}", fe.kind());
            }
            assert!(se.iter().all(|s| *s >= 0.0));
        }
    }

    #[test]
    fn tanh_vjp_approaches_linear_for_small_preactivation() {
        let mut rng = SeededRng::new(21);
        let a = rng.gaussian_tensor(3, 3, 1.0);
        let mut x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
        let ax = Tensor::row_vector(&x).unwrap().matmul_t(&a).unwrap();
        let scale = 1e-4 / ax.max_abs();
        x.iter_mut().for_each(|v| *v *= scale);
        let v: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
        let gt = FrontEnd::tanh_linear(&a).param_vjp(&x, &v).unwrap();
        let gl = FrontEnd::linear_matrix(&a).param_vjp(&x, &v).unwrap();
        let diff = gt.iter().zip(&gl).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-7, "diff {diff}");
    }

    #[test]
    fn channel_moments() {
        let mut rng = SeededRng::new(5);
        let fe = FrontEnd::scalar_gain(1.0, 1);
        let dist = InputDistribution::isotropic(1.0, 1).unwrap();
        let b = sample_channel(&fe, &dist, 0.5, 100_000, &mut rng, None).unwrap();
        let var = |t: &Tensor| {
            let n = t.len() as f64;
            let m = t.data().iter().sum::<f64>() / n;
            t.data().iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
        };
        assert!((var(&b.z) - 0.5).abs() < 0.01);
        assert!((var(&b.y) - 1.5).abs() < 0.03);
        assert_eq!(b.y, b.w.add(&b.z).unwrap());
    }

    #[test]
    fn linear_channel_covariance_within_three_se() {
        let mut rng = SeededRng::new(15);
        let a = rng.gaussian_tensor(2, 3, 1.0);
        let fe = FrontEnd::linear_matrix(&a);
        let dist = InputDistribution::isotropic(0.8, 3).unwrap();
        let t = 0.3;
        let n = 100_000;
        let b = sample_channel(&fe, &dist, t, n, &mut rng, None).unwrap();
        let expect = output_covariance(&a, &dist.covariance(), t).unwrap();
        let (mean, cov) = crate::math::linalg::sample_covariance(&b.y);
        for i in 0..2 {
            let se_mean = (expect.get(i, i) / n as f64).sqrt();
            assert!(mean.data()[i].abs() <= 3.0 * se_mean);
            for j in 0..2 {
                let var_ij = expect.get(i, i) * expect.get(j, j) + expect.get(i, j).powi(2);
                let se = (var_ij / n as f64).sqrt();
                assert!((cov.get(i, j) - expect.get(i, j)).abs() <= 3.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn task_identity_copies_x() {
        let mut rng = SeededRng::new(3);
        let fe = FrontEnd::linear_matrix(&Tensor::identity(3));
        let dist = InputDistribution::isotropic(1.0, 3).unwrap();
        let task = TaskMap::new(Tensor::identity(3)).unwrap();
        let b = sample_channel(&fe, &dist, 0.5, 10, &mut rng, Some(&task)).unwrap();
        assert_eq!(b.tau.as_ref().unwrap(), &b.x);
        assert!(TaskMap::new(Tensor::zeros(4, 3)).is_err());
    }

    #[test]
    fn mixture_sampling_matches_moments() {
        let comps = vec![
            MixtureComponent { weight: 0.3, mean: vec![-2.0, 0.0], cov: Tensor::identity(2).scale(0.5) },
            MixtureComponent { weight: 0.7, mean: vec![1.0, 1.0], cov: Tensor::identity(2) },
        ];
        let dist = InputDistribution::mixture(comps).unwrap();
        let mut rng = SeededRng::new(12);
        let x = dist.sample(100_000, &mut rng);
        let (mean, cov) = crate::math::linalg::sample_covariance(&x);
        assert!((mean.data()[0] - 0.1).abs() < 0.03);
        let expect = dist.covariance();
        assert!(cov.sub(&expect).unwrap().max_abs() < 0.05);
        let bad = vec![MixtureComponent { weight: 0.5, mean: vec![0.0], cov: Tensor::identity(1) }];
        assert!(InputDistribution::mixture(bad).is_err());
    }

    #[test]
    fn test_matrix_spectrum() {
        let mut rng = SeededRng::new(99);
        let tm = test_matrix_factors(8, 8, 12.0, &mut rng);
        let s = crate::math::singular_values(&tm.a).unwrap();
        assert!((s[0] / s[7] - 12.0).abs() < 1e-8);
        assert!((tm.a.frobenius_norm() - 8f64.sqrt()).abs() < 1e-10);
        let utu = tm.u.t_matmul(&tm.u).unwrap().sub(&Tensor::identity(8)).unwrap();
        assert!(utu.max_abs() < 1e-10);
        let flat = generate_test_matrix(5, 5, 1.0, &mut rng);
        let s = crate::math::singular_values(&flat).unwrap();
        assert!(s.iter().all(|v| (v - s[0]).abs() < 1e-10));
    }
}
