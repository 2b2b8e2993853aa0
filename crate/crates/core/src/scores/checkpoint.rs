//! Plain-text checkpoints for learned score models.
//!
//! ```text
//! infograd-score-v1
//! kind mlp|conditional_mlp
//! cond_dim <k>
//! widths <d0> <d1> ...
//! calibration <c>
//! dsm_mode perturb_w_sqrt_t|perturb_y_fixed <sigma>
//! dsm_steps <S>
//! dsm_batch <B>
//! adamw <lr> <beta1> <beta2> <eps> <weight_decay> <clip|none>
//! params <count>
//! <one value per line>
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a save/load
//! cycle is exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::adamw::AdamWConfig;
use super::dsm::{DsmConfig, DsmMode};
use super::mlp::MlpNet;
use super::model::{ScoreKind, ScoreModel};

pub const HEADER: &str = "infograd-score-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ScoreModel,
    pub dsm: DsmConfig,
}

pub fn write_checkpoint(model: &ScoreModel, dsm: &DsmConfig) -> Result<String> {
    let (kind, net, cond_dim) = match model.kind() {
        ScoreKind::Mlp(net) => ("mlp", net, 0),
        ScoreKind::ConditionalMlp { net, cond_dim } => ("conditional_mlp", net, *cond_dim),
        _ => return Err(Error::Checkpoint("only learned score models can be checkpointed".into())),
    };
    let mut s = String::new();
    let widths: Vec<String> = net.widths().iter().map(|w| w.to_string()).collect();
    let mode = match dsm.mode {
        DsmMode::PerturbWSqrtT => "perturb_w_sqrt_t".to_string(),
        DsmMode::PerturbYFixed { sigma } => format!("perturb_y_fixed {sigma:?}"),
    };
    let o = &dsm.optimizer;
    let clip = o.clip_norm.map_or("none".to_string(), |c| format!("{c:?}"));
    s.push_str(HEADER);
    s.push('\n');
    s.push_str(&format!("kind {kind}\ncond_dim {cond_dim}\nwidths {}\n", widths.join(" ")));
    s.push_str(&format!("calibration {:?}\ndsm_mode {mode}\n", model.calibration()));
    s.push_str(&format!("dsm_steps {}\ndsm_batch {}\n", dsm.steps, dsm.batch));
    s.push_str(&format!(
        "adamw {:?} {:?} {:?} {:?} {:?} {clip}\n",
        o.lr, o.beta1, o.beta2, o.eps, o.weight_decay
    ));
    s.push_str(&format!("params {}\n", net.num_params()));
    for p in net.params() {
        s.push_str(&format!("{p:?}\n"));
    }
    Ok(s)
}

fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<Vec<&'a str>> {
    let line = lines.next().ok_or_else(|| Error::Checkpoint(format!("missing `{key}` line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Checkpoint(format!("expected `{key}`, found `{line}`")));
    }
    Ok(parts.collect())
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Checkpoint(format!("cannot parse `{s}`")))
}

fn single<T: std::str::FromStr>(parts: &[&str], key: &str) -> Result<T> {
    match parts {
        [v] => num(v),
        _ => Err(Error::Checkpoint(format!("`{key}` takes one value"))),
    }
}

pub fn read_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(Error::Checkpoint(format!("missing `{HEADER}` header")));
    }
    let kind = field(&mut lines, "kind")?;
    let cond_dim: usize = single(&field(&mut lines, "cond_dim")?, "cond_dim")?;
    let widths = field(&mut lines, "widths")?.iter().map(|w| num(w)).collect::<Result<Vec<usize>>>()?;
    let calibration: f64 = single(&field(&mut lines, "calibration")?, "calibration")?;
    let mode = match field(&mut lines, "dsm_mode")?.as_slice() {
        ["perturb_w_sqrt_t"] => DsmMode::PerturbWSqrtT,
        ["perturb_y_fixed", sigma] => DsmMode::PerturbYFixed { sigma: num(sigma)? },
        other => return Err(Error::Checkpoint(format!("unknown dsm_mode {other:?}"))),
    };
    let steps = single(&field(&mut lines, "dsm_steps")?, "dsm_steps")?;
    let batch = single(&field(&mut lines, "dsm_batch")?, "dsm_batch")?;
    let optimizer = match field(&mut lines, "adamw")?.as_slice() {
        [lr, b1, b2, eps, wd, clip] => AdamWConfig {
            lr: num(lr)?,
            beta1: num(b1)?,
            beta2: num(b2)?,
            eps: num(eps)?,
            weight_decay: num(wd)?,
            clip_norm: if *clip == "none" { None } else { Some(num(clip)?) },
        },
        _ => return Err(Error::Checkpoint("`adamw` takes six values".into())),
    };
    let count: usize = single(&field(&mut lines, "params")?, "params")?;
    let params = lines.filter(|l| !l.trim().is_empty()).map(num).collect::<Result<Vec<f64>>>()?;
    if params.len() != count {
        return Err(Error::Checkpoint(format!("expected {count} parameters, found {}", params.len())));
    }
    let net = MlpNet::from_params(&widths, params).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut model = match kind.as_slice() {
        ["mlp"] => ScoreModel::mlp(net),
        ["conditional_mlp"] => ScoreModel::conditional_mlp(net, cond_dim)?,
        other => return Err(Error::Checkpoint(format!("unknown kind {other:?}"))),
    };
    model.set_calibration(calibration)?;
    Ok(Checkpoint { model, dsm: DsmConfig { mode, steps, batch, optimizer } })
}

pub fn save_checkpoint(path: &Path, model: &ScoreModel, dsm: &DsmConfig) -> Result<()> {
    let text = write_checkpoint(model, dsm)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::SeededRng;

    fn dsm() -> DsmConfig {
        DsmConfig {
            mode: DsmMode::PerturbYFixed { sigma: 0.1 },
            steps: 200,
            batch: 512,
            optimizer: AdamWConfig { weight_decay: 0.0, ..Default::default() },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rng = SeededRng::new(9);
        let mut net = MlpNet::score_net(6, 4, 8, &mut rng).unwrap();
        for v in net.params_mut() {
            *v += rng.standard_normal() / 3.0;
        }
        let mut model = ScoreModel::conditional_mlp(net, 2).unwrap();
        model.set_calibration(0.987654321).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("score.txt");
        save_checkpoint(&path, &model, &dsm()).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.model, model);
        assert_eq!(back.dsm, dsm());
    }

    #[test]
    fn rejects_bad_header_and_truncation() {
        assert!(matches!(read_checkpoint("nope\n"), Err(Error::Checkpoint(_))));
        let model = ScoreModel::mlp(MlpNet::zeros(&[2, 3, 2]).unwrap());
        let text = write_checkpoint(&model, &dsm()).unwrap();
        let cut: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_checkpoint(&cut), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn analytic_models_are_not_checkpointed() {
        let model = ScoreModel::analytic_gaussian(&crate::Tensor::identity(2), &[0.0, 0.0]).unwrap();
        assert!(write_checkpoint(&model, &dsm()).is_err());
    }
}
