//! Flat `key = value` experiment configuration with typed per-experiment defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable that overrides the default seed.
pub const SEED_ENV: &str = "INFOGRAD_SEED";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    E1ScalarGradient,
    E2VectorGradient,
    E3MiMaximize,
    E4TanhMaximize,
    E5IbOptimize,
    Validate,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::E1ScalarGradient,
        Experiment::E2VectorGradient,
        Experiment::E3MiMaximize,
        Experiment::E4TanhMaximize,
        Experiment::E5IbOptimize,
        Experiment::Validate,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Experiment::E1ScalarGradient => "e1_scalar_gradient",
            Experiment::E2VectorGradient => "e2_vector_gradient",
            Experiment::E3MiMaximize => "e3_mi_maximize",
            Experiment::E4TanhMaximize => "e4_tanh_maximize",
            Experiment::E5IbOptimize => "e5_ib_optimize",
            Experiment::Validate => "validate",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Value {
    /// Parses `raw` as the same variant as `self`.
    fn parse_like(&self, key: &str, raw: &str) -> Result<Value> {
        let raw = raw.trim();
        let fail = || Error::ConfigInvalid(format!("`{key}`: cannot parse `{raw}`"));
        Ok(match self {
            Value::Int(_) => Value::Int(raw.parse().map_err(|_| fail())?),
            Value::Float(_) => {
                let v: f64 = raw.parse().map_err(|_| fail())?;
                if !v.is_finite() {
                    return Err(fail());
                }
                Value::Float(v)
            }
            Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| fail())?),
            Value::Text(_) => Value::Text(raw.to_string()),
        })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            // `{:?}` is the shortest representation that parses back exactly
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
        }
    }
}

fn defaults(exp: Experiment) -> Vec<(&'static str, Value)> {
    use Value::*;
    let dsm = |sigma_key: &'static str, sigma: f64, steps: u64, batch: u64, wd: f64| {
        vec![
            ("hidden", Int(256)),
            ("dsm_steps", Int(steps)),
            ("dsm_batch", Int(batch)),
            (sigma_key, Float(sigma)),
            ("dsm_lr", Float(1e-3)),
            ("weight_decay", Float(wd)),
            ("clip_norm", Float(1.0)),
        ]
    };
    let mut out = vec![("seed", Int(DEFAULT_SEED))];
    match exp {
        Experiment::E1ScalarGradient => out.extend([
            ("sigma_x", Float(1.0)),
            ("t", Float(0.5)),
            ("alpha_min", Float(0.0)),
            ("alpha_max", Float(3.0)),
            ("alpha_points", Int(61)),
            ("samples", Int(200_000)),
        ]),
        Experiment::E2VectorGradient => {
            out.extend([
                ("n", Int(8)),
                ("sigma_x2", Float(1.0)),
                ("t", Float(0.5)),
                ("alpha_max", Float(3.0)),
                ("alpha_points", Int(16)),
                ("cond_ratio", Float(12.0)),
                ("samples", Int(100_000)),
                ("scores", Text("both".into())),
                ("save_checkpoints", Bool(false)),
            ]);
            out.extend(dsm("dsm_sigma_scale", 0.1, 1000, 4096, 1e-4));
        }
        Experiment::E3MiMaximize | Experiment::E4TanhMaximize => {
            let n = if exp == Experiment::E3MiMaximize { 8 } else { 12 };
            out.extend([
                ("n", Int(n)),
                ("sigma_x2", Float(1.0)),
                ("t", Float(0.5)),
                ("radius", Float(5.0)),
                ("samples", Int(50_000)),
                ("outer_iters", Int(60)),
                ("lr_eta", Float(0.05)),
                ("regularizer", Float(0.0)),
                ("warm_start", Bool(true)),
            ]);
            out.extend(dsm("dsm_sigma_scale", 0.1, 1000, 4096, 1e-4));
            if exp == Experiment::E3MiMaximize {
                out.push(("scores", Text("learned".into())));
            } else {
                out.extend([("kde_every", Int(1)), ("kde_samples", Int(10_000))]);
            }
        }
        Experiment::E5IbOptimize => {
            out.extend([
                ("n", Int(12)),
                ("k", Int(4)),
                ("t", Float(0.5)),
                ("beta", Float(1.0)),
                ("radius", Float(5.0)),
                ("samples", Int(50_000)),
                ("outer_iters", Int(60)),
                ("lr_eta", Float(0.05)),
                ("regularizer", Float(0.0)),
                ("warm_start", Bool(true)),
                ("scores", Text("learned".into())),
            ]);
            out.extend(dsm("dsm_sigma", 0.1, 200, 512, 0.0));
        }
        Experiment::Validate => out.push(("tolerance_scale", Float(1.0))),
    }
    out
}

/// Keys whose defaults are carried over from `e3_mi_maximize` rather than stated
/// for the experiment itself; flagged in the config echo.
fn inherited_keys(exp: Experiment) -> &'static [&'static str] {
    match exp {
        Experiment::E4TanhMaximize => {
            &["t", "radius", "samples", "outer_iters", "lr_eta", "dsm_steps", "dsm_batch", "dsm_sigma_scale"]
        }
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    values: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    /// Defaults for `experiment`, without the seed environment override.
    pub fn defaults(experiment: Experiment) -> Self {
        let values = defaults(experiment).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        Self { experiment, values }
    }

    /// Defaults with `INFOGRAD_SEED` applied when set.
    pub fn from_env(experiment: Experiment) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        if let Ok(raw) = std::env::var(SEED_ENV) {
            cfg.set("seed", &raw)?;
        }
        Ok(cfg)
    }

    /// Overrides one key, parsing `raw` with the key's type. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let key = key.trim();
        let current = self.values.get(key).ok_or_else(|| {
            Error::ConfigInvalid(format!("unknown key `{key}` for experiment {}", self.experiment))
        })?;
        let v = current.parse_like(key, raw)?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::ConfigInvalid(format!("override `{spec}` is not key=value")))?;
        self.set(k, v)
    }

    /// Applies every `key = value` line of a config text. `#` starts a comment;
    /// an `experiment` line must match this config's experiment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ConfigInvalid(format!("line {}: expected `key = value`", no + 1)))?;
            if k.trim() == "experiment" {
                let e: Experiment = v.trim().parse()?;
                if e != self.experiment {
                    return Err(Error::ConfigInvalid(format!(
                        "config is for {e}, but {} was requested",
                        self.experiment
                    )));
                }
                continue;
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    /// Parses a full config text (for example an echo) starting from defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let exp_line = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == "experiment"))
            .ok_or_else(|| Error::ConfigInvalid("missing `experiment` line".into()))?;
        let mut cfg = Self::defaults(exp_line.1.trim().parse()?);
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.usize_or_u64("seed")
    }

    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("{} has no key `{key}`", self.experiment))
    }

    fn usize_or_u64(&self, key: &str) -> u64 {
        match self.get(key) {
            Value::Int(v) => *v,
            other => panic!("`{key}` is not an integer: {other:?}"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        self.usize_or_u64(key) as usize
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            other => panic!("`{key}` is not a float: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(v) => *v,
            other => panic!("`{key}` is not a bool: {other:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(v) => v,
            other => panic!("`{key}` is not text: {other:?}"),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Sorted `key = value` lines, preceded by the experiment id.
    pub fn echo(&self) -> String {
        let inherited = inherited_keys(self.experiment);
        let mut s = format!("experiment = {}\n", self.experiment);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}"));
            if inherited.contains(&k.as_str()) {
                s.push_str("  # default copied from e3_mi_maximize");
            }
            s.push('\n');
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the echo.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
