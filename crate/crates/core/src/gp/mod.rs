//! Squared-exponential ARD kernel and noise-free GP regression.

mod hyperopt;
mod kernel;
mod posterior;

pub(crate) use hyperopt::{feasible_start, multi_start, RESIDUAL_LIMIT};
pub use hyperopt::{optimize_hyperparameters, SearchOptions};
pub(crate) use kernel::row_major;
pub use kernel::{kernel_eval, kernel_matrix, Hyperparameters};
pub use posterior::{fit_gp, log_marginal_likelihood, GpPosterior, GpPosteriorRecord, DEFAULT_JITTER};
pub(crate) use posterior::gaussian_log_likelihood;
