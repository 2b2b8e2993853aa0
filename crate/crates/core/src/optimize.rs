//! Alternating score learning and projected information ascent.
//!
//! Each outer iteration refreshes the score model(s) on fresh samples from the
//! current front-end (skipped when scores are analytic), then draws an
//! independent estimation batch, Stein-calibrates learned scores on it and
//! takes one projected gradient step on `η`.

use std::time::Instant;

use crate::channels::{sample_channel, FrontEnd, InputDistribution, TaskMap};
use crate::error::{Error, Result};
use crate::estimators::{default_bandwidth_grid, ib_gradient, info_gradient, mi_kde, task_info_gradient};
use crate::math::{frobenius_project, SeededRng, Tensor};
use crate::scores::{
    dsm_step, optimizer_for, stein_calibrate, AdamWConfig, AdamWState, DsmConfig, DsmMode, MlpNet, ScoreModel,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    None,
    /// `λ ‖η‖²`
    SquaredFrobenius(f64),
}

impl Regularizer {
    pub fn weight(&self) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::SquaredFrobenius(l) => *l,
        }
    }
}

/// Unweighted regularizer value `C(η)` and gradient `∇C(η)`.
pub fn regularizer_grad(reg: &Regularizer, eta: &[f64]) -> (f64, Vec<f64>) {
    match reg {
        Regularizer::None => (0.0, vec![0.0; eta.len()]),
        Regularizer::SquaredFrobenius(_) => {
            (eta.iter().map(|v| v * v).sum(), eta.iter().map(|v| 2.0 * v).collect())
        }
    }
}

/// `Π_{‖·‖_F ≤ P}(η + lr·g)`; plain ascent without a radius.
pub fn projected_ascent_step(eta: &Tensor, grad: &Tensor, lr: f64, radius: Option<f64>) -> Result<Tensor> {
    let mut next = eta.clone();
    next.axpy(lr, grad)?;
    Ok(match radius {
        Some(p) => frobenius_project(&next, p),
        None => next,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AscentMode {
    PlainMi,
    TaskMi,
    Ib,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    /// Closed-form linear-Gaussian scores, recomputed from `η` every iteration.
    Analytic,
    /// MLP scores trained by DSM in Phase 1.
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentConfig {
    /// Outer iterations `K`.
    pub outer_iters: usize,
    /// DSM steps per outer iteration `S`.
    pub inner_steps: usize,
    pub lr_eta: f64,
    /// Estimation batch size for the Phase 2 gradient.
    pub estimate_samples: usize,
    pub radius: Option<f64>,
    pub regularizer: Regularizer,
    pub beta: f64,
    pub mode: AscentMode,
    pub scores: ScoreSource,
    pub dsm_mode: DsmMode,
    pub dsm_batch: usize,
    /// Optimizer for the score nets (its `lr` is `α_θ`).
    pub score_optimizer: AdamWConfig,
    pub hidden: usize,
    pub warm_start: bool,
    /// Record KDE MI every this many iterations (0 disables).
    pub kde_every: usize,
    pub kde_samples: usize,
    pub seed: u64,
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if !(self.lr_eta > 0.0) {
            return bad(format!("lr_eta must be positive, got {}", self.lr_eta));
        }
        if !(self.beta >= 0.0) {
            return bad(format!("beta must be nonnegative, got {}", self.beta));
        }
        if self.regularizer.weight() < 0.0 {
            return bad("regularizer weight must be nonnegative".into());
        }
        if let Some(p) = self.radius {
            if !(p > 0.0) {
                return bad(format!("projection radius must be positive, got {p}"));
            }
        }
        if self.estimate_samples < 100 {
            return bad("estimate_samples must be at least 100".into());
        }
        if self.scores == ScoreSource::Learned {
            DsmConfig { mode: self.dsm_mode, steps: self.inner_steps, batch: self.dsm_batch, optimizer: self.score_optimizer }
                .validate()?;
            if self.hidden == 0 {
                return bad("hidden width must be positive".into());
            }
        }
        if self.kde_every > 0 && self.kde_samples > crate::estimators::kde::MAX_KDE_SAMPLES {
            return bad(format!("kde_samples capped at {}", crate::estimators::kde::MAX_KDE_SAMPLES));
        }
        Ok(())
    }
}

/// Closed-form values reported by an oracle hook.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleValues {
    /// The objective being maximized (MI, task MI or `L_IB`).
    pub objective: f64,
    pub i_xy: Option<f64>,
    pub i_ty: Option<f64>,
}

/// Telemetry for one iterate. Iteration 0 is the initial point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationRecord {
    pub iter: usize,
    pub oracle: Option<OracleValues>,
    pub mi_kde: Option<f64>,
    pub kde_bandwidth: Option<f64>,
    /// Norm of the step direction (information gradient minus regularizer).
    pub grad_norm: f64,
    pub frob_norm: f64,
    pub dsm_loss: Option<f64>,
    pub stein_c: Option<f64>,
    pub stein_c_cond: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AscentTrace {
    pub initial: IterationRecord,
    /// One record per completed outer iteration.
    pub records: Vec<IterationRecord>,
}

impl AscentTrace {
    /// Initial record followed by the per-iteration records.
    pub fn all(&self) -> impl Iterator<Item = &IterationRecord> {
        std::iter::once(&self.initial).chain(&self.records)
    }
}

#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub front_end: FrontEnd,
    pub trace: AscentTrace,
    /// Set when the run stopped early; the trace holds the completed iterations.
    pub aborted: Option<Error>,
}

pub type OracleHook<'a> = &'a dyn Fn(&FrontEnd) -> Result<OracleValues>;

struct LearnedNet {
    net: MlpNet,
    opt: AdamWState,
}

impl LearnedNet {
    fn fresh(input: usize, output: usize, cfg: &AscentConfig, rng: &mut SeededRng) -> Result<Self> {
        let net = MlpNet::score_net(input, output, cfg.hidden, rng)?;
        let opt = optimizer_for(&net, cfg.score_optimizer);
        Ok(Self { net, opt })
    }
}

struct Runner<'a> {
    cfg: &'a AscentConfig,
    dist: &'a InputDistribution,
    t: f64,
    task: Option<&'a TaskMap>,
    oracle: Option<OracleHook<'a>>,
    init_rng: SeededRng,
    phase1_rng: SeededRng,
    phase2_rng: SeededRng,
    kde_rng: SeededRng,
    marginal: Option<LearnedNet>,
    conditional: Option<LearnedNet>,
    start: Instant,
}

impl Runner<'_> {
    fn needs_condition(&self) -> bool {
        self.cfg.mode != AscentMode::PlainMi
    }

    fn observe(&mut self, fe: &FrontEnd, iter: usize, record: &mut IterationRecord) -> Result<()> {
        record.iter = iter;
        record.frob_norm = fe.params().iter().map(|v| v * v).sum::<f64>().sqrt();
        if let Some(hook) = self.oracle {
            record.oracle = Some(hook(fe)?);
        }
        if self.cfg.kde_every > 0 && iter.is_multiple_of(self.cfg.kde_every) {
            let b = sample_channel(fe, self.dist, self.t, self.cfg.kde_samples, &mut self.kde_rng, None)?;
            let (mi, fit) = mi_kde(&b.y, self.t, &default_bandwidth_grid())?;
            record.mi_kde = Some(mi);
            record.kde_bandwidth = Some(fit.bandwidth);
        }
        record.wall_seconds = self.start.elapsed().as_secs_f64();
        Ok(())
    }

    /// Phase 1: refresh the learned nets on samples from the current `η`.
    fn train_scores(&mut self, fe: &FrontEnd) -> Result<Option<f64>> {
        let m = fe.output_dim();
        if !self.cfg.warm_start || self.marginal.is_none() {
            self.marginal = Some(LearnedNet::fresh(m, m, self.cfg, &mut self.init_rng)?);
            if self.needs_condition() {
                let k = self.task.ok_or(Error::MissingCondition)?.task_dim();
                self.conditional = Some(LearnedNet::fresh(m + k, m, self.cfg, &mut self.init_rng)?);
            }
        }
        let mut last = None;
        for _ in 0..self.cfg.inner_steps {
            let task = if self.needs_condition() { self.task } else { None };
            let batch = sample_channel(fe, self.dist, self.t, self.cfg.dsm_batch, &mut self.phase1_rng, task)?;
            let marg = self.marginal.as_mut().expect("initialized above");
            last = Some(dsm_step(&mut marg.net, &batch, self.cfg.dsm_mode, &mut marg.opt, &mut self.phase1_rng)?);
            if let Some(cond) = self.conditional.as_mut() {
                dsm_step(&mut cond.net, &batch, self.cfg.dsm_mode, &mut cond.opt, &mut self.phase1_rng)?;
            }
        }
        Ok(last)
    }

    fn analytic_scores(&self, fe: &FrontEnd) -> Result<(ScoreModel, Option<ScoreModel>)> {
        let uncond = ScoreModel::exact_for(fe, self.dist, self.t)?;
        let cond = if self.needs_condition() {
            let a = fe.linear_map().ok_or_else(|| Error::ConfigInvalid("analytic scores need a linear front-end".into()))?;
            let w = self.task.ok_or(Error::MissingCondition)?.matrix();
            Some(ScoreModel::conditional_linear_gaussian(&a, w, &self.dist.covariance(), self.t)?)
        } else {
            None
        };
        Ok((uncond, cond))
    }

    fn iterate(&mut self, fe: &FrontEnd, iter: usize) -> Result<(FrontEnd, IterationRecord)> {
        let mut record = IterationRecord::default();
        let (mut uncond, mut cond) = match self.cfg.scores {
            ScoreSource::Analytic => self.analytic_scores(fe)?,
            ScoreSource::Learned => {
                record.dsm_loss = self.train_scores(fe)?;
                let uncond = ScoreModel::mlp(self.marginal.as_ref().expect("trained").net.clone());
                let cond = match &self.conditional {
                    Some(c) => Some(ScoreModel::conditional_mlp(c.net.clone(), self.task.ok_or(Error::MissingCondition)?.task_dim())?),
                    None => None,
                };
                (uncond, cond)
            }
        };

        // Phase 2 on an independent batch
        let task = if self.needs_condition() { self.task } else { None };
        let batch = sample_channel(fe, self.dist, self.t, self.cfg.estimate_samples, &mut self.phase2_rng, task)?;
        if uncond.is_learned() {
            record.stein_c = Some(stein_calibrate(&mut uncond, &batch.y, None)?);
        }
        if let Some(c) = cond.as_mut().filter(|c| c.is_learned()) {
            record.stein_c_cond = Some(stein_calibrate(c, &batch.y, batch.tau.as_ref())?);
        }
        let est = match self.cfg.mode {
            AscentMode::PlainMi => info_gradient(fe, &uncond, &batch)?,
            AscentMode::TaskMi => task_info_gradient(fe, cond.as_ref().ok_or(Error::MissingCondition)?, &uncond, &batch)?,
            AscentMode::Ib => ib_gradient(fe, cond.as_ref().ok_or(Error::MissingCondition)?, &uncond, self.cfg.beta, &batch)?,
        };
        let (_, reg) = regularizer_grad(&self.cfg.regularizer, fe.params());
        let lambda = self.cfg.regularizer.weight();
        let dir: Vec<f64> = est.grad.iter().zip(&reg).map(|(g, r)| g - lambda * r).collect();
        record.grad_norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eta = Tensor::new(1, dir.len(), fe.params().to_vec())?;
        let step = Tensor::new(1, dir.len(), dir)?;
        let next = projected_ascent_step(&eta, &step, self.cfg.lr_eta, self.cfg.radius)?;
        let fe_next = fe.with_params(next.into_data())?;
        self.observe(&fe_next, iter, &mut record)?;
        Ok((fe_next, record))
    }
}

/// Runs `cfg.outer_iters` alternating iterations from `fe`.
///
/// The oracle hook, when given, is evaluated at every iterate. Errors in the
/// loop (for example a diverging DSM loss) stop the run and are returned in
/// [`AscentOutcome::aborted`] together with the completed part of the trace.
pub fn alternating_optimize(
    fe: &FrontEnd,
    dist: &InputDistribution,
    t: f64,
    task: Option<&TaskMap>,
    cfg: &AscentConfig,
    oracle: Option<OracleHook<'_>>,
) -> Result<AscentOutcome> {
    cfg.validate()?;
    if cfg.mode != AscentMode::PlainMi && task.is_none() {
        return Err(Error::MissingCondition);
    }
    if dist.dim() != fe.input_dim() {
        return Err(Error::ShapeMismatch(format!("input dim {} vs front-end {}", dist.dim(), fe.input_dim())));
    }
    let base = SeededRng::new(cfg.seed);
    let mut runner = Runner {
        cfg,
        dist,
        t,
        task,
        oracle,
        init_rng: base.substream("score-init"),
        phase1_rng: base.substream("phase1"),
        phase2_rng: base.substream("phase2"),
        kde_rng: base.substream("kde"),
        marginal: None,
        conditional: None,
        start: Instant::now(),
    };
    let mut trace = AscentTrace::default();
    runner.observe(fe, 0, &mut trace.initial)?;
    let mut current = fe.clone();
    for k in 1..=cfg.outer_iters {
        match runner.iterate(&current, k) {
            Ok((next, record)) => {
                current = next;
                trace.records.push(record);
            }
            Err(e) => return Ok(AscentOutcome { front_end: current, trace, aborted: Some(e) }),
        }
    }
    Ok(AscentOutcome { front_end: current, trace, aborted: None })
}
