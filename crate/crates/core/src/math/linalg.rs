//! Cholesky factorization, SVD, projection and quadrature.

use nalgebra::DMatrix;

use super::Tensor;
use crate::error::{Error, Result};

/// Ridge for factoring exact (oracle) covariances.
pub const ORACLE_RIDGE: f64 = 1e-10;
/// Ridge for factoring sample covariances.
pub const SAMPLE_RIDGE: f64 = 1e-8;

/// Lower Cholesky factor `L` of an SPD matrix together with `log det`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    lower: Tensor,
    log_det: f64,
}

impl PsdFactor {
    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Tensor {
        &self.lower
    }

    /// `log det M` in nats.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> Tensor {
        self.lower.matmul_t(&self.lower).expect("square factor")
    }

    /// Solves `L z = v` in place.
    pub fn forward_substitute(&self, v: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.lower.row(i);
            let s: f64 = (0..i).map(|j| row[j] * v[j]).sum();
            v[i] = (v[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = z` in place.
    pub fn back_substitute(&self, v: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lower.get(j, i) * v[j]).sum();
            v[i] = (v[i] - s) / self.lower.get(i, i);
        }
    }

    /// Solves `M x = v` in place.
    pub fn solve_in_place(&self, v: &mut [f64]) {
        self.forward_substitute(v);
        self.back_substitute(v);
    }

    /// Solves `M xᵢ = yᵢ` for every row `yᵢ` of an `N×d` batch.
    pub fn solve_rows(&self, y: &Tensor) -> Result<Tensor> {
        if y.cols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "row length {} vs factor dim {}",
                y.cols(),
                self.dim()
            )));
        }
        let mut out = y.clone();
        for r in 0..out.rows() {
            self.solve_in_place(out.row_mut(r));
        }
        Ok(out)
    }

    /// `M⁻¹`.
    pub fn inverse(&self) -> Tensor {
        solve_psd(self, &Tensor::identity(self.dim())).expect("identity matches dim")
    }
}

/// Cholesky factorization of `M + ridge·I`.
pub fn cholesky(m: &Tensor, ridge: f64) -> Result<PsdFactor> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("cholesky of non-square {:?}", m.shape())));
    }
    if !m.is_symmetric(1e-10) {
        return Err(Error::ShapeMismatch("cholesky input is not symmetric".into()));
    }
    let n = m.rows();
    let mut l = Tensor::zeros(n, n);
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = m.get(j, j) + ridge;
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        log_det += 2.0 * djj.ln();
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(PsdFactor { lower: l, log_det })
}

/// Solves `M X = B` column by column.
pub fn solve_psd(factor: &PsdFactor, b: &Tensor) -> Result<Tensor> {
    if b.rows() != factor.dim() {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} rows, factor dim {}",
            b.rows(),
            factor.dim()
        )));
    }
    let bt = b.transpose();
    Ok(factor.solve_rows(&bt)?.transpose())
}

/// `log det M` via Cholesky.
pub fn log_det_psd(m: &Tensor, ridge: f64) -> Result<f64> {
    Ok(cholesky(m, ridge)?.log_det())
}

fn to_nalgebra(a: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

fn from_nalgebra(m: &DMatrix<f64>) -> Tensor {
    let mut out = Tensor::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.set(r, c, m[(r, c)]);
        }
    }
    out
}

/// Singular values in descending order, length `min(m, n)`.
pub fn singular_values(a: &Tensor) -> Result<Vec<f64>> {
    if !a.all_finite() {
        return Err(Error::NonFinite("singular_values input".into()));
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut s: Vec<f64> = to_nalgebra(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Orthogonal factor `Q` of a thin QR decomposition, with column signs fixed
/// so that `diag(R) ≥ 0`.
pub fn qr_orthogonal(a: &Tensor) -> Tensor {
    let qr = to_nalgebra(a).qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..q.ncols().min(r.nrows()) {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    from_nalgebra(&q)
}

/// Radial projection onto `{‖A‖_F ≤ radius}`.
pub fn frobenius_project(a: &Tensor, radius: f64) -> Tensor {
    let norm = a.frobenius_norm();
    if norm <= radius {
        return a.clone();
    }
    // rounding can leave the rescaled norm an ulp above the radius; shrink
    // until feasible so a second projection is an exact no-op
    let mut c = radius / norm;
    loop {
        let p = a.scale(c);
        if p.frobenius_norm() <= radius {
            return p;
        }
        c = c.next_down();
    }
}

/// Cumulative trapezoid integral; `out[0] = 0`.
pub fn trapezoid_cumulative(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "trapezoid grid {} vs values {}",
            xs.len(),
            ys.len()
        )));
    }
    check_increasing(xs)?;
    let mut out = Vec::with_capacity(xs.len());
    out.push(0.0);
    for k in 1..xs.len() {
        let prev = out[k - 1];
        out.push(prev + 0.5 * (ys[k - 1] + ys[k]) * (xs[k] - xs[k - 1]));
    }
    Ok(out)
}

pub(crate) fn check_increasing(xs: &[f64]) -> Result<()> {
    match xs.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(Error::NonMonotonicGrid(i + 1)),
        None => Ok(()),
    }
}

/// `n` equally spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` log-spaced points from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), n).into_iter().map(f64::exp).collect()
}

/// Sample mean (`1×m`) and unbiased covariance (`m×m`) of an `N×m` batch.
pub fn sample_covariance(samples: &Tensor) -> (Tensor, Tensor) {
    let mean = samples.column_means();
    let mut centered = samples.clone();
    for r in 0..centered.rows() {
        for (v, mu) in centered.row_mut(r).iter_mut().zip(mean.data()) {
            *v -= mu;
        }
    }
    let denom = (samples.rows().max(2) - 1) as f64;
    let cov = centered.t_matmul(&centered).expect("shapes agree").scale(1.0 / denom);
    (mean, symmetrize(&cov))
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &Tensor) -> Tensor {
    let at = a.transpose();
    a.add(&at).expect("square").scale(0.5)
}

/// Result of whitening a sample batch.
#[derive(Debug, Clone)]
pub struct Whitened {
    pub samples: Tensor,
    /// `-½ log det(Ĉ + ridge·I)`; `H(Y) = H(whitened) − log_det_transform`.
    pub log_det_transform: f64,
}

/// Maps samples to zero mean and identity sample covariance.
pub fn whiten(samples: &Tensor, ridge: f64) -> Result<Whitened> {
    let (n, m) = samples.shape();
    if n <= m {
        return Err(Error::DegenerateSample(format!("whitening needs N > m, got N={n}, m={m}")));
    }
    let (mean, cov) = sample_covariance(samples);
    let factor = cholesky(&cov, ridge)?;
    let mut out = samples.clone();
    for r in 0..n {
        let row = out.row_mut(r);
        for (v, mu) in row.iter_mut().zip(mean.data()) {
            *v -= mu;
        }
        factor.forward_substitute(row);
    }
    Ok(Whitened { samples: out, log_det_transform: -0.5 * factor.log_det() })
}
