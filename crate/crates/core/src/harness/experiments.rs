//! The five experiment drivers. Each returns its raw results; [`tables`]
//! turns them into CSV tables and [`write_outputs`] puts everything on disk.

use std::path::Path;

use crate::channels::{
    generate_test_matrix, random_matrix_on_sphere, sample_channel, FrontEnd, InputDistribution, TaskMap,
};
use crate::error::{Error, Result};
use crate::estimators::{
    grad_alpha_closed_form, ib_closed_form, info_gradient, mi_closed_form_general, mi_closed_form_linear,
    mi_scalar, optimum_mi_frobenius, path_integral_mi, task_mi_closed_form, grad_scalar,
};
use crate::math::{linspace, SeededRng, Tensor};
use crate::optimize::{
    alternating_optimize, AscentConfig, AscentMode, AscentOutcome, OracleValues, Regularizer, ScoreSource,
};
use crate::scores::{
    optimizer_for, save_checkpoint, stein_calibrate, train_dsm, AdamWConfig, DsmConfig, DsmMode, MlpNet, ScoreModel,
};

use super::config::{Experiment, ExperimentConfig};
use super::csv::{Cell, CsvTable};

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ConfigInvalid(msg.into()))
}

fn positive(cfg: &ExperimentConfig, keys: &[&str]) -> Result<()> {
    for k in keys {
        if !(cfg.float(k) > 0.0) {
            return invalid(format!("`{k}` must be positive"));
        }
    }
    Ok(())
}

fn at_least(cfg: &ExperimentConfig, key: &str, min: usize) -> Result<()> {
    if cfg.int(key) < min {
        return invalid(format!("`{key}` must be at least {min}"));
    }
    Ok(())
}

fn score_sources(cfg: &ExperimentConfig) -> Result<Vec<ScoreSource>> {
    match cfg.text("scores") {
        "analytic" => Ok(vec![ScoreSource::Analytic]),
        "learned" => Ok(vec![ScoreSource::Learned]),
        "both" => Ok(vec![ScoreSource::Analytic, ScoreSource::Learned]),
        other => invalid(format!("`scores` must be analytic, learned or both, got `{other}`")),
    }
}

fn source_name(s: ScoreSource) -> &'static str {
    match s {
        ScoreSource::Analytic => "analytic",
        ScoreSource::Learned => "learned",
    }
}

fn score_optimizer(cfg: &ExperimentConfig) -> AdamWConfig {
    let clip = cfg.float("clip_norm");
    AdamWConfig {
        lr: cfg.float("dsm_lr"),
        weight_decay: cfg.float("weight_decay"),
        clip_norm: if clip > 0.0 { Some(clip) } else { None },
        ..AdamWConfig::default()
    }
}

fn check_dsm_keys(cfg: &ExperimentConfig) -> Result<()> {
    positive(cfg, &["dsm_lr"])?;
    at_least(cfg, "hidden", 1)?;
    at_least(cfg, "dsm_batch", 1)?;
    if cfg.float("weight_decay") < 0.0 {
        return invalid("`weight_decay` must be nonnegative");
    }
    Ok(())
}

// ---------------------------------------------------------------- E1

#[derive(Debug, Clone, PartialEq)]
pub struct E1Result {
    pub alphas: Vec<f64>,
    pub grad_analytic: Vec<f64>,
    pub grad_vjp: Vec<f64>,
    pub grad_stderr: Vec<f64>,
    pub mi_analytic: Vec<f64>,
    pub mi_path_integral: Vec<f64>,
}

/// Scalar channel `Y = αX + Z`: VJP gradient with the exact score over an α grid,
/// and the MI curve rebuilt from it by path integration.
pub fn run_e1(cfg: &ExperimentConfig) -> Result<E1Result> {
    positive(cfg, &["sigma_x", "t"])?;
    at_least(cfg, "alpha_points", 2)?;
    at_least(cfg, "samples", 2)?;
    let (lo, hi) = (cfg.float("alpha_min"), cfg.float("alpha_max"));
    if !(hi > lo) {
        return invalid("`alpha_max` must exceed `alpha_min`");
    }
    let (sigma, t, n) = (cfg.float("sigma_x"), cfg.float("t"), cfg.int("samples"));
    let s2 = sigma * sigma;
    let base = SeededRng::new(cfg.seed());
    let dist = InputDistribution::isotropic(sigma, 1)?;
    let alphas = linspace(lo, hi, cfg.int("alpha_points"));
    let mut res = E1Result {
        alphas: alphas.clone(),
        grad_analytic: Vec::new(),
        grad_vjp: Vec::new(),
        grad_stderr: Vec::new(),
        mi_analytic: Vec::new(),
        mi_path_integral: Vec::new(),
    };
    for (k, &alpha) in alphas.iter().enumerate() {
        let mut rng = base.substream(&format!("alpha-{k}"));
        let fe = FrontEnd::scalar_gain(alpha, 1);
        let score = ScoreModel::exact_for(&fe, &dist, t)?;
        let batch = sample_channel(&fe, &dist, t, n, &mut rng, None)?;
        let g = info_gradient(&fe, &score, &batch)?;
        res.grad_analytic.push(grad_scalar(alpha, s2, t));
        res.grad_vjp.push(g.grad[0]);
        res.grad_stderr.push(g.stderr[0]);
        res.mi_analytic.push(mi_scalar(alpha, s2, t));
    }
    res.mi_path_integral = path_integral_mi(&alphas, &res.grad_vjp, mi_scalar(lo, s2, t))?.values;
    Ok(res)
}

// ---------------------------------------------------------------- E2

#[derive(Debug, Clone, PartialEq)]
pub struct E2Result {
    pub alphas: Vec<f64>,
    pub grad_analytic: Vec<f64>,
    pub grad_true_score: Option<Vec<f64>>,
    pub true_stderr: Option<Vec<f64>>,
    pub grad_learned_score: Option<Vec<f64>>,
    pub stein_c: Option<Vec<f64>>,
    /// Trained per-α models (learned runs only).
    pub models: Vec<ScoreModel>,
    pub dsm: Option<DsmConfig>,
}

/// `E2` α grid: `alpha_max · k / points` for `k = 1..=points`.
pub fn e2_alpha_grid(alpha_max: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|k| alpha_max * k as f64 / points as f64).collect()
}

/// Vector channel `Y = αAX + Z`: analytic `∂I/∂α` against VJP estimates with the
/// exact score and with a per-α DSM score (Stein calibrated).
pub fn run_e2(cfg: &ExperimentConfig) -> Result<E2Result> {
    positive(cfg, &["sigma_x2", "t", "alpha_max", "dsm_sigma_scale"])?;
    at_least(cfg, "n", 1)?;
    at_least(cfg, "alpha_points", 1)?;
    at_least(cfg, "samples", 100)?;
    if cfg.float("cond_ratio") < 1.0 {
        return invalid("`cond_ratio` must be at least 1");
    }
    let sources = score_sources(cfg)?;
    let learned = sources.contains(&ScoreSource::Learned);
    if learned {
        check_dsm_keys(cfg)?;
    }
    let (n, s2, t) = (cfg.int("n"), cfg.float("sigma_x2"), cfg.float("t"));
    let base = SeededRng::new(cfg.seed());
    let a = generate_test_matrix(n, n, cfg.float("cond_ratio"), &mut base.substream("matrix"));
    let dist = InputDistribution::isotropic(s2.sqrt(), n)?;
    let alphas = e2_alpha_grid(cfg.float("alpha_max"), cfg.int("alpha_points"));
    let dsm = DsmConfig {
        mode: DsmMode::PerturbYFixed { sigma: cfg.float("dsm_sigma_scale") * t.sqrt() },
        steps: cfg.int("dsm_steps"),
        batch: cfg.int("dsm_batch"),
        optimizer: score_optimizer(cfg),
    };
    let mut res = E2Result {
        alphas: alphas.clone(),
        grad_analytic: Vec::new(),
        grad_true_score: sources.contains(&ScoreSource::Analytic).then(Vec::new),
        true_stderr: sources.contains(&ScoreSource::Analytic).then(Vec::new),
        grad_learned_score: learned.then(Vec::new),
        stein_c: learned.then(Vec::new),
        models: Vec::new(),
        dsm: learned.then_some(dsm),
    };
    for (k, &alpha) in alphas.iter().enumerate() {
        let fe = FrontEnd::scaled_fixed_linear(alpha, a.clone());
        res.grad_analytic.push(grad_alpha_closed_form(&a, alpha, s2, t)?);
        let batch = sample_channel(&fe, &dist, t, cfg.int("samples"), &mut base.substream(&format!("estimate-{k}")), None)?;
        if let (Some(g), Some(se)) = (res.grad_true_score.as_mut(), res.true_stderr.as_mut()) {
            let est = info_gradient(&fe, &ScoreModel::exact_for(&fe, &dist, t)?, &batch)?;
            g.push(est.grad[0]);
            se.push(est.stderr[0]);
        }
        if learned {
            let mut net = MlpNet::score_net(n, n, cfg.int("hidden"), &mut base.substream(&format!("init-{k}")))?;
            let mut opt = optimizer_for(&net, dsm.optimizer);
            let mut train_rng = base.substream(&format!("train-{k}"));
            train_dsm(&mut net, &dsm, &mut opt, &mut train_rng, |r| sample_channel(&fe, &dist, t, dsm.batch, r, None))?;
            let mut model = ScoreModel::mlp(net);
            let c = stein_calibrate(&mut model, &batch.y, None)?;
            let est = info_gradient(&fe, &model, &batch)?;
            res.grad_learned_score.as_mut().expect("learned").push(est.grad[0]);
            res.stein_c.as_mut().expect("learned").push(c);
            res.models.push(model);
        }
    }
    Ok(res)
}

// ---------------------------------------------------------------- E3–E5

fn ascent_config(cfg: &ExperimentConfig, scores: ScoreSource, mode: AscentMode, dsm_mode: DsmMode) -> AscentConfig {
    let lambda = cfg.float("regularizer");
    AscentConfig {
        outer_iters: cfg.int("outer_iters"),
        inner_steps: cfg.int("dsm_steps"),
        lr_eta: cfg.float("lr_eta"),
        estimate_samples: cfg.int("samples"),
        radius: Some(cfg.float("radius")),
        regularizer: if lambda > 0.0 { Regularizer::SquaredFrobenius(lambda) } else { Regularizer::None },
        beta: 0.0,
        mode,
        scores,
        dsm_mode,
        dsm_batch: cfg.int("dsm_batch"),
        score_optimizer: score_optimizer(cfg),
        hidden: cfg.int("hidden"),
        warm_start: cfg.flag("warm_start"),
        kde_every: 0,
        kde_samples: 0,
        seed: cfg.seed(),
    }
}

fn check_ascent_keys(cfg: &ExperimentConfig) -> Result<()> {
    positive(cfg, &["t", "radius", "lr_eta"])?;
    at_least(cfg, "n", 1)?;
    at_least(cfg, "samples", 100)?;
    if cfg.float("regularizer") < 0.0 {
        return invalid("`regularizer` must be nonnegative");
    }
    check_dsm_keys(cfg)
}

#[derive(Debug, Clone)]
pub struct E3Result {
    pub i_star: f64,
    pub runs: Vec<(ScoreSource, AscentOutcome)>,
}

/// Projected MI ascent for `Y = AX + Z` under `‖A‖_F ≤ P`.
pub fn run_e3(cfg: &ExperimentConfig) -> Result<E3Result> {
    check_ascent_keys(cfg)?;
    positive(cfg, &["sigma_x2", "dsm_sigma_scale"])?;
    let (n, s2, t, p) = (cfg.int("n"), cfg.float("sigma_x2"), cfg.float("t"), cfg.float("radius"));
    let base = SeededRng::new(cfg.seed());
    let a0 = random_matrix_on_sphere(n, n, p, &mut base.substream("init-matrix"));
    let fe = FrontEnd::linear_matrix(&a0);
    let dist = InputDistribution::isotropic(s2.sqrt(), n)?;
    let oracle = |fe: &FrontEnd| {
        let a = fe.linear_map().expect("linear front-end");
        let mi = mi_closed_form_linear(&a, s2, t)?;
        Ok(OracleValues { objective: mi, i_xy: Some(mi), i_ty: None })
    };
    let dsm_mode = DsmMode::PerturbYFixed { sigma: cfg.float("dsm_sigma_scale") * t.sqrt() };
    let mut runs = Vec::new();
    for source in score_sources(cfg)? {
        let acfg = ascent_config(cfg, source, AscentMode::PlainMi, dsm_mode);
        runs.push((source, alternating_optimize(&fe, &dist, t, None, &acfg, Some(&oracle))?));
    }
    Ok(E3Result { i_star: optimum_mi_frobenius(n, s2, t, p), runs })
}

/// Projected MI ascent for `Y = tanh(AX) + Z`, monitored by KDE MI.
pub fn run_e4(cfg: &ExperimentConfig) -> Result<AscentOutcome> {
    check_ascent_keys(cfg)?;
    positive(cfg, &["sigma_x2", "dsm_sigma_scale"])?;
    at_least(cfg, "kde_every", 1)?;
    if cfg.int("kde_samples") <= cfg.int("n") + 1 {
        return invalid("`kde_samples` must exceed n + 1");
    }
    let (n, s2, t, p) = (cfg.int("n"), cfg.float("sigma_x2"), cfg.float("t"), cfg.float("radius"));
    let base = SeededRng::new(cfg.seed());
    let a0 = random_matrix_on_sphere(n, n, p, &mut base.substream("init-matrix"));
    let fe = FrontEnd::tanh_linear(&a0);
    let dist = InputDistribution::isotropic(s2.sqrt(), n)?;
    let dsm_mode = DsmMode::PerturbYFixed { sigma: cfg.float("dsm_sigma_scale") * t.sqrt() };
    let mut acfg = ascent_config(cfg, ScoreSource::Learned, AscentMode::PlainMi, dsm_mode);
    acfg.kde_every = cfg.int("kde_every");
    acfg.kde_samples = cfg.int("kde_samples");
    alternating_optimize(&fe, &dist, t, None, &acfg, None)
}

#[derive(Debug, Clone)]
pub struct E5Result {
    pub w: Tensor,
    pub outcome: AscentOutcome,
}

/// IB ascent `max I(T;Y) − β I(X;Y)` for `Y = AX + Z`, `T = WX`.
pub fn run_e5(cfg: &ExperimentConfig) -> Result<E5Result> {
    check_ascent_keys(cfg)?;
    positive(cfg, &["dsm_sigma"])?;
    if !(cfg.float("beta") >= 0.0) {
        return invalid("`beta` must be nonnegative");
    }
    let (n, k, t, p, beta) = (cfg.int("n"), cfg.int("k"), cfg.float("t"), cfg.float("radius"), cfg.float("beta"));
    if k == 0 || k > n {
        return invalid("`k` must be in 1..=n");
    }
    let sources = score_sources(cfg)?;
    if sources.len() != 1 {
        return invalid("e5 runs a single score source");
    }
    let base = SeededRng::new(cfg.seed());
    let a0 = random_matrix_on_sphere(n, n, p, &mut base.substream("init-matrix"));
    let w = base.substream("task").gaussian_tensor(k, n, 1.0);
    let sx = Tensor::identity(n);
    let fe = FrontEnd::linear_matrix(&a0);
    let dist = InputDistribution::isotropic(1.0, n)?;
    let task = TaskMap::new(w.clone())?;
    let oracle = |fe: &FrontEnd| {
        let a = fe.linear_map().expect("linear front-end");
        Ok(OracleValues {
            objective: ib_closed_form(&a, &w, &sx, t, beta)?,
            i_xy: Some(mi_closed_form_general(&a, &sx, t)?),
            i_ty: Some(task_mi_closed_form(&a, &w, &sx, t)?),
        })
    };
    let mut acfg = ascent_config(cfg, sources[0], AscentMode::Ib, DsmMode::PerturbYFixed { sigma: cfg.float("dsm_sigma") });
    acfg.beta = beta;
    let outcome = alternating_optimize(&fe, &dist, t, Some(&task), &acfg, Some(&oracle))?;
    Ok(E5Result { w, outcome })
}

// ---------------------------------------------------------------- output

/// Everything one experiment run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// `(file name, table)` pairs.
    pub tables: Vec<(String, CsvTable)>,
    pub checkpoints: Vec<(String, ScoreModel, DsmConfig)>,
    pub aborted: Option<Error>,
}

fn meta(cfg: &ExperimentConfig) -> String {
    format!("infograd {} config_hash={} seed={}", cfg.experiment, cfg.hash(), cfg.seed())
}

fn trace_table(
    cfg: &ExperimentConfig,
    header: &[&str],
    outcome: &AscentOutcome,
    row: impl Fn(&crate::optimize::IterationRecord) -> Option<Vec<Cell>>,
) -> Result<CsvTable> {
    let mut table = CsvTable::new(header, meta(cfg));
    for r in outcome.trace.all() {
        if let Some(cells) = row(r) {
            table.push(cells)?;
        }
    }
    table.truncated = outcome.aborted.as_ref().map(|e| e.to_string());
    Ok(table)
}

/// Runs `cfg` and returns its tables without touching the file system.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let id = cfg.experiment.id();
    let mut out = ExperimentOutput { tables: Vec::new(), checkpoints: Vec::new(), aborted: None };
    match cfg.experiment {
        Experiment::E1ScalarGradient => {
            let r = run_e1(cfg)?;
            let mut t = CsvTable::new(&["alpha", "grad_analytic", "grad_vjp", "mi_analytic", "mi_path_integral"], meta(cfg));
            for i in 0..r.alphas.len() {
                t.push(
                    [r.alphas[i], r.grad_analytic[i], r.grad_vjp[i], r.mi_analytic[i], r.mi_path_integral[i]]
                        .map(Cell::Real)
                        .to_vec(),
                )?;
            }
            out.tables.push((format!("{id}.csv"), t));
        }
        Experiment::E2VectorGradient => {
            let r = run_e2(cfg)?;
            let mut header = vec!["alpha", "grad_analytic"];
            if r.grad_true_score.is_some() {
                header.push("grad_true_score");
            }
            if r.grad_learned_score.is_some() {
                header.extend(["grad_learned_score", "stein_c"]);
            }
            let mut t = CsvTable::new(&header, meta(cfg));
            for i in 0..r.alphas.len() {
                let mut row = vec![Cell::Real(r.alphas[i]), Cell::Real(r.grad_analytic[i])];
                if let Some(g) = &r.grad_true_score {
                    row.push(Cell::Real(g[i]));
                }
                if let (Some(g), Some(c)) = (&r.grad_learned_score, &r.stein_c) {
                    row.extend([Cell::Real(g[i]), Cell::Real(c[i])]);
                }
                t.push(row)?;
            }
            out.tables.push((format!("{id}.csv"), t));
            if cfg.flag("save_checkpoints") {
                if let Some(dsm) = r.dsm {
                    for (k, m) in r.models.into_iter().enumerate() {
                        out.checkpoints.push((format!("{id}_alpha{:02}.score", k + 1), m, dsm));
                    }
                }
            }
        }
        Experiment::E3MiMaximize => {
            let r = run_e3(cfg)?;
            for (source, outcome) in &r.runs {
                let t = trace_table(cfg, &["iter", "mi_closed_form", "grad_norm", "frob_norm", "I_star"], outcome, |rec| {
                    let mi = rec.oracle?.objective;
                    Some(vec![rec.iter.into(), mi.into(), rec.grad_norm.into(), rec.frob_norm.into(), r.i_star.into()])
                })?;
                out.tables.push((format!("{id}_{}.csv", source_name(*source)), t));
                out.aborted = out.aborted.or_else(|| outcome.aborted.clone());
            }
        }
        Experiment::E4TanhMaximize => {
            let outcome = run_e4(cfg)?;
            let t = trace_table(cfg, &["iter", "mi_kde", "bandwidth", "frob_norm"], &outcome, |rec| {
                Some(vec![rec.iter.into(), rec.mi_kde?.into(), rec.kde_bandwidth?.into(), rec.frob_norm.into()])
            })?;
            out.tables.push((format!("{id}.csv"), t));
            out.aborted = outcome.aborted;
        }
        Experiment::E5IbOptimize => {
            let r = run_e5(cfg)?;
            let t = trace_table(cfg, &["iter", "L_ib", "I_TY", "I_XY", "frob_norm"], &r.outcome, |rec| {
                let o = rec.oracle?;
                Some(vec![rec.iter.into(), o.objective.into(), o.i_ty?.into(), o.i_xy?.into(), rec.frob_norm.into()])
            })?;
            out.tables.push((format!("{id}.csv"), t));
            out.aborted = r.outcome.aborted;
        }
        Experiment::Validate => return invalid("the validation suite is run with `infograd validate`"),
    }
    Ok(out)
}

/// Writes the config echo, every table and every checkpoint into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let echo = dir.join(format!("{}.config", cfg.experiment.id()));
    std::fs::write(&echo, cfg.echo())?;
    written.push(echo);
    for (name, table) in &output.tables {
        let path = dir.join(name);
        table.write(&path)?;
        written.push(path);
    }
    for (name, model, dsm) in &output.checkpoints {
        let path = dir.join(name);
        save_checkpoint(&path, model, dsm)?;
        written.push(path);
    }
    Ok(written)
}
