//! Score models: closed-form Gaussian and mixture scores, an MLP trained by
//! denoising score matching, and Stein calibration.

pub mod adamw;
pub mod checkpoint;
pub mod dsm;
pub mod mlp;
pub mod model;

pub use adamw::{AdamWConfig, AdamWState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use dsm::{dsm_loss, dsm_step, optimizer_for, train_dsm, DsmConfig, DsmMode};
pub use mlp::{MlpGradients, MlpNet, DEFAULT_HIDDEN};
pub use model::{stein_calibrate, MixtureScore, ScoreKind, ScoreModel};
