//! Nonstationary Gaussian-process smoothing of a RUL trajectory.
//!
//! The model is `y(x) = h(x)ᵀβ + z(x)` with a quadratic trend `h = [1, x, x²]`
//! and a zero-mean GP `z` whose covariance is a dot-product kernel plus a
//! length-scale kernel. In the local variant the length scale varies with
//! `x`; it is interpolated from log-lengths at fixed support points by a
//! second-level squared-exponential GP. The trend is estimated by
//! generalized least squares and the covariance hyperparameters by
//! maximizing the marginal likelihood.

mod dump;
mod field;
mod fit;
mod gp;
pub mod kernels;
mod interval;
mod simplex;

pub use dump::{dump_model, load_model};
pub use field::{LengthScaleField, LOG_LENGTH_BOUNDS};
pub use fit::{fit, noisy_kernel_matrix, FitConfig, FitReport, KernelKind, ParamCodec};
pub use gp::{
    combined_kernel_matrix, fit_mean_beta, gaussian_log_density, log_marginal_likelihood, trend_basis,
    GprDataset, GprModel, KernelParams, LengthModel, MAX_FIT_POINTS, MIN_FIT_POINTS,
};
pub use interval::{
    confidence_interval, predict_failure_time, Bound, ConfidenceLevel, FailureOutcome, RulPrediction,
};
pub use kernels::{dot_product_kernel, local_length_scale_kernel, se_kernel};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};
