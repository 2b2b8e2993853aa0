//! Score-based information gradients for parametric Gaussian channels.
//!
//! The channel model is `Y_t = f_η(X) + Z_t` with `Z_t ~ N(0, t I_m)`. The
//! gradient of the mutual information with respect to the front-end
//! parameters is an expectation of a vector-Jacobian product against the
//! marginal score of `Y_t`:
//!
//! ```text
//! ∇_η I(X; Y_t) = -E[ Df_η(X)ᵀ s_Y(Y_t) ]
//! ```
//!
//! Task-oriented (`I(T; Y_t)`) and information-bottleneck objectives swap in
//! a conditional score `s_{Y|T}`. Scores are either closed form or learned
//! with denoising score matching on a small MLP.
//!
//! Module map:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`math`] | dense tensors, Cholesky, SVD, projection, quadrature, seeded RNG |
//! | [`channels`] | front-ends, input distributions, task maps, channel sampler |
//! | [`scores`] | analytic and learned score models, DSM, Stein calibration |
//! | [`estimators`] | VJP gradient estimators, Fisher/path-integral MI, closed forms, KDE |
//! | [`optimize`] | alternating score/parameter ascent with Frobenius projection |
//! | [`harness`] | experiment configs, CSV output, validation suite |

pub mod channels;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod math;
pub mod optimize;
pub mod scores;

pub use error::{Error, Result};
pub use math::{PsdFactor, SeededRng, Tensor};
