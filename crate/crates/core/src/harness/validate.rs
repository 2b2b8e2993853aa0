//! Property checks that need no learned models. Each check reports a measured
//! value and passes when it is strictly below its (scaled) threshold.

use crate::channels::{sample_channel, FrontEnd, InputDistribution, MixtureComponent, TaskMap};
use crate::error::Result;
use crate::estimators::{
    fisher_grid, fisher_information, fisher_integral_mi, fisher_tail_bound, ib_gradient, info_gradient,
    kde_loo_entropy, default_bandwidth_grid, mi_closed_form_general, mi_scalar, task_info_gradient,
    task_mi_closed_form,
};
use crate::math::linalg::log_det_psd;
use crate::math::{frobenius_project, mean_and_stderr, SeededRng, Tensor};
use crate::scores::{MlpNet, ScoreModel};

pub const TAGS: [&str; 8] = ["vjp", "mlp", "stein", "task", "ib", "fisher", "closed_form", "kde"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub tag: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "name": self.name,
            "tag": self.tag,
            "measured": self.measured,
            "threshold": self.threshold,
            "pass": self.pass,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub records: Vec<CheckRecord>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.records.iter().map(|r| r.to_json() + "\n").collect()
    }

    fn push(&mut self, name: impl Into<String>, tag: &'static str, measured: f64, threshold: f64, scale: f64) {
        let threshold = threshold * scale;
        self.records.push(CheckRecord { name: name.into(), tag, measured, threshold, pass: measured < threshold });
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|j| {
            let orig = p[j];
            p[j] = orig + h;
            let up = f(&p);
            p[j] = orig - h;
            let down = f(&p);
            p[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn vjp_checks(rep: &mut ValidationReport, rng: &mut SeededRng, scale: f64) -> Result<()> {
    let (n, m) = (4, 3);
    let a = rng.gaussian_tensor(m, n, 0.6);
    let square = rng.gaussian_tensor(n, n, 0.6);
    let cases = [
        ("scalar_gain", FrontEnd::scalar_gain(0.8, n)),
        ("scaled_fixed_linear", FrontEnd::scaled_fixed_linear(1.3, square)),
        ("linear_matrix", FrontEnd::linear_matrix(&a)),
        ("tanh_linear", FrontEnd::tanh_linear(&a)),
    ];
    for (name, fe) in cases {
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let fe = fe.with_params(fe.params().iter().map(|p| p + 0.2 * rng.standard_normal()).collect())?;
            let x = rng.gaussian_tensor(1, n, 1.0);
            let v = rng.gaussian_tensor(1, fe.output_dim(), 1.0);
            let vjp = fe.param_vjp(x.data(), v.data())?;
            let inner = |p: &[f64]| {
                let out = fe.with_params(p.to_vec()).and_then(|f| f.forward(&x)).expect("valid params");
                out.data().iter().zip(v.data()).map(|(o, c)| o * c).sum::<f64>()
            };
            let fd = central_difference(inner, fe.params(), 1e-5);
            worst = worst.max(rel_err(&vjp, &fd));
        }
        rep.push(format!("vjp_finite_difference_{name}"), "vjp", worst, 1e-6, scale);
    }
    Ok(())
}

fn mlp_checks(rep: &mut ValidationReport, rng: &mut SeededRng, scale: f64) -> Result<()> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let widths = [3, 4 + i % 5, 16 - i, 2];
        let mut net = MlpNet::init(&widths, rng)?;
        // init zeroes the output layer; randomize it so every block is exercised
        for p in net.params_mut() {
            if *p == 0.0 {
                *p = 0.3 * rng.standard_normal();
            }
        }
        let input = rng.gaussian_tensor(5, 3, 1.0);
        let upstream = rng.gaussian_tensor(5, 2, 1.0);
        let g = net.forward_backward(&input, &upstream)?.param_grads;
        let widths = net.widths().to_vec();
        let loss = |p: &[f64]| {
            let out = MlpNet::from_params(&widths, p.to_vec()).and_then(|n| n.forward(&input)).expect("same shape");
            out.data().iter().zip(upstream.data()).map(|(o, u)| o * u).sum::<f64>() / 5.0
        };
        let fd = central_difference(loss, net.params(), 1e-5);
        worst = worst.max(rel_err(&g, &fd));
    }
    rep.push("mlp_parameter_gradient", "mlp", worst, 1e-5, scale);
    Ok(())
}

fn stein_checks(rep: &mut ValidationReport, rng: &mut SeededRng, scale: f64) -> Result<()> {
    let (n, t, count) = (3, 0.5, 100_000);
    let a = rng.gaussian_tensor(n, n, 0.8);
    let fe = FrontEnd::linear_matrix(&a);
    let dist = InputDistribution::isotropic(1.0, n)?;
    let score = ScoreModel::exact_for(&fe, &dist, t)?;
    let batch = sample_channel(&fe, &dist, t, count, rng, None)?;
    let s = score.eval(&batch.y, None)?;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let col: Vec<f64> = (0..count).map(|i| s.get(i, j)).collect();
        let (mean, se) = mean_and_stderr(&col);
        worst = worst.max(mean.abs() / se);
    }
    rep.push("score_mean_zero_in_stderr_units", "stein", worst, 3.0, scale);
    let inner: Vec<f64> =
        (0..count).map(|i| batch.y.row(i).iter().zip(s.row(i)).map(|(y, v)| y * v).sum()).collect();
    let (mean, se) = mean_and_stderr(&inner);
    rep.push("stein_identity_in_stderr_units", "stein", (mean + n as f64).abs() / se, 3.0, scale);

    // a one-component mixture must reproduce the Gaussian score
    let cov = Tensor::identity(n);
    let comp = MixtureComponent { weight: 1.0, mean: vec![0.0; n], cov: cov.clone() };
    let mix = ScoreModel::gaussian_mixture(&[comp], &a, &vec![0.0; n], t)?;
    let gauss = ScoreModel::linear_gaussian(&a, &cov, t)?;
    let probe = Tensor::new(1000, n, batch.y.data()[..1000 * n].to_vec())?;
    let diff = mix.eval(&probe, None)?.sub(&gauss.eval(&probe, None)?)?.max_abs();
    rep.push("mixture_single_component_equals_gaussian", "stein", diff, 1e-12, scale);
    Ok(())
}

fn task_checks(rep: &mut ValidationReport, rng: &mut SeededRng, scale: f64) -> Result<()> {
    let (n, t) = (3, 0.5);
    let a = rng.gaussian_tensor(n, n, 0.7);
    let fe = FrontEnd::linear_matrix(&a);
    let dist = InputDistribution::isotropic(1.0, n)?;
    let identity = TaskMap::new(Tensor::identity(n))?;
    let batch = sample_channel(&fe, &dist, t, 100_000, rng, Some(&identity))?;
    let uncond = ScoreModel::exact_for(&fe, &dist, t)?;
    let cond = ScoreModel::conditional_given_x(fe.clone(), t);
    let task_g = task_info_gradient(&fe, &cond, &uncond, &batch)?;
    let info_g = info_gradient(&fe, &uncond, &batch)?;
    let cond_only = ib_gradient(&fe, &cond, &uncond, 1.0, &batch)?;
    let worst = (0..task_g.grad.len())
        .map(|j| (task_g.grad[j] - info_g.grad[j]).abs() / cond_only.stderr[j])
        .fold(0.0, f64::max);
    rep.push("task_gradient_with_t_equal_x_in_stderr_units", "task", worst, 3.0, scale);

    let k = 2;
    let w = rng.gaussian_tensor(k, n, 1.0);
    let task = TaskMap::new(w.clone())?;
    let batch = sample_channel(&fe, &dist, t, 5_000, rng, Some(&task))?;
    let cond = ScoreModel::conditional_linear_gaussian(&a, &w, &dist.covariance(), t)?;
    let tg = task_info_gradient(&fe, &cond, &uncond, &batch)?;
    let ib0 = ib_gradient(&fe, &cond, &uncond, 0.0, &batch)?;
    let diff = tg.grad.iter().zip(&ib0.grad).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    rep.push("ib_beta_zero_equals_task_gradient", "ib", diff, 1e-12, scale);
    Ok(())
}

fn fisher_checks(rep: &mut ValidationReport, rng: &mut SeededRng, scale: f64) -> Result<()> {
    let (alpha, sx2, t_star): (f64, f64, f64) = (1.0, 1.0, 0.5);
    let fe = FrontEnd::scalar_gain(alpha, 1);
    let dist = InputDistribution::isotropic(sx2.sqrt(), 1)?;
    let grid = fisher_grid(t_star);
    let mut j = Vec::with_capacity(grid.len());
    for &t in &grid {
        let score = ScoreModel::exact_for(&fe, &dist, t)?;
        let batch = sample_channel(&fe, &dist, t, 10_000, rng, None)?;
        j.push(fisher_information(&score, &batch.y, None)?.0);
    }
    let t_max = *grid.last().expect("non-empty grid");
    let est = fisher_integral_mi(&grid, &j, 1)? + fisher_tail_bound(alpha * alpha * sx2, t_max);
    let truth = mi_scalar(alpha, sx2, t_star);
    rep.push("fisher_integral_scalar_mi_relative", "fisher", (est - truth).abs() / truth, 0.01, scale);
    Ok(())
}

fn closed_form_checks(rep: &mut ValidationReport, rng: &mut SeededRng, scale: f64) -> Result<()> {
    let (n, t) = (5, 0.5);
    let a = rng.gaussian_tensor(n, n, 1.0);
    let sx = Tensor::identity(n);
    let full = mi_closed_form_general(&a, &sx, t)?;
    let task = task_mi_closed_form(&a, &Tensor::identity(n), &sx, t)?;
    rep.push("task_mi_with_t_equal_x_equals_mi", "closed_form", (task - full).abs(), 1e-9, scale);
    let w = rng.gaussian_tensor(2, n, 1.0);
    let partial = task_mi_closed_form(&a, &w, &sx, t)?;
    // data processing: I(T;Y) ≤ I(X;Y); report the violation (0 when it holds)
    rep.push("task_mi_data_processing_violation", "closed_form", (partial - full).max(0.0), 1e-12, scale);

    let b = rng.gaussian_tensor(4, 6, 3.0);
    let once = frobenius_project(&b, 2.0);
    let twice = frobenius_project(&once, 2.0);
    rep.push("projection_idempotence", "closed_form", twice.sub(&once)?.max_abs(), 1e-12, scale);
    rep.push("projection_feasibility", "closed_form", (once.frobenius_norm() - 2.0).max(0.0), 1e-12, scale);
    Ok(())
}

fn kde_checks(rep: &mut ValidationReport, rng: &mut SeededRng, scale: f64) -> Result<()> {
    let m = 2;
    let l = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.6, 0.8]])?;
    let samples = rng.gaussian_tensor(10_000, m, 1.0).matmul_t(&l)?;
    let cov = l.matmul_t(&l)?;
    let truth = 0.5 * (m as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + log_det_psd(&cov, 0.0)?);
    let est = kde_loo_entropy(&samples, &default_bandwidth_grid())?.entropy;
    rep.push("kde_entropy_gaussian_nats", "kde", (est - truth).abs(), 0.05, scale);
    Ok(())
}

type Check = fn(&mut ValidationReport, &mut SeededRng, f64) -> Result<()>;

const CHECKS: [(&str, Check); 8] = [
    ("vjp", vjp_checks),
    ("mlp", mlp_checks),
    ("stein", stein_checks),
    ("task", task_checks),
    ("ib", task_checks),
    ("fisher", fisher_checks),
    ("closed_form", closed_form_checks),
    ("kde", kde_checks),
];

/// Runs every check group (or only those emitting `tag`). Thresholds are
/// multiplied by `tolerance_scale`.
pub fn run_validation_suite(seed: u64, tag: Option<&str>, tolerance_scale: f64) -> Result<ValidationReport> {
    let base = SeededRng::new(seed);
    let mut rep = ValidationReport::default();
    let mut ran_task_group = false;
    for (group, check) in CHECKS {
        let wanted = match tag {
            None => group != "ib",
            Some(tag) => tag == group,
        };
        // the task and ib records come from one group
        let is_task_group = group == "task" || group == "ib";
        if !wanted || (is_task_group && ran_task_group) {
            continue;
        }
        ran_task_group |= is_task_group;
        let mut rng = base.substream(if is_task_group { "task" } else { group });
        check(&mut rep, &mut rng, tolerance_scale)?;
    }
    if let Some(tag) = tag {
        rep.records.retain(|r| r.tag == tag);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_filter_selects_one_group() {
        let rep = run_validation_suite(7, Some("vjp"), 1.0).unwrap();
        assert_eq!(rep.records.len(), 4);
        assert!(rep.records.iter().all(|r| r.tag == "vjp" && r.pass), "{:?}", rep.records);
    }

    #[test]
    fn ib_tag_runs_only_the_reduction() {
        let rep = run_validation_suite(7, Some("ib"), 1.0).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert!(rep.all_passed());
    }

    #[test]
    fn zero_tolerance_fails() {
        let rep = run_validation_suite(7, Some("closed_form"), 0.0).unwrap();
        assert!(!rep.all_passed());
        assert!(rep.to_json_lines().contains("\"pass\":false"));
    }

    #[test]
    fn unknown_tag_yields_empty_report() {
        assert!(run_validation_suite(7, Some("nope"), 1.0).unwrap().records.is_empty());
    }
}
