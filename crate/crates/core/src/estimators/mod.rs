//! Information estimators and closed-form references.
//!
//! - [`gradient`]: VJP estimators for `I(X;Y)`, `I(T;Y)` and the IB objective
//! - [`integral`]: Fisher information, Fisher-integral and path-integral MI
//! - [`closed_form`]: log-det MI, analytic gradients, the Frobenius-ball optimum
//! - [`kde`]: leave-one-out KDE entropy and the entropy-route MI

pub mod closed_form;
pub mod gradient;
pub mod integral;
pub mod kde;

pub use closed_form::{
    grad_alpha_closed_form, grad_scalar, ib_closed_form, mi_closed_form_general, mi_closed_form_linear,
    mi_scalar, mi_singular_value_sum, optimum_mi_frobenius, task_mi_closed_form,
};
pub use gradient::{ib_gradient, info_gradient, task_info_gradient, utility_scaled_gradient, GradientEstimate};
pub use integral::{
    fisher_grid, fisher_information, fisher_integral_mi, fisher_integral_task_mi, fisher_tail_bound,
    path_integral_mi, CurveMeaning, MiCurve,
};
pub use kde::{default_bandwidth_grid, kde_loo_entropy, mi_kde, KdeEntropy};
