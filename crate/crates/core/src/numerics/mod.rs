//! Dense numeric kernels shared by initialization and training.

mod finite_diff;
mod kmeans;
mod line_search;
mod logistic;
mod wls;

pub use finite_diff::finite_diff_grad;
pub use kmeans::{kmeans2, KMeans2};
pub use line_search::{armijo_backtrack, lbfgs_minimize, ArmijoStep, LbfgsOptions, LbfgsResult, MAX_BACKTRACKS};
pub use logistic::{fit_logistic, logistic_loss, LogisticFit, LogisticProblem, IRLS_GRAD_TOL, IRLS_MAX_ITERS};
pub use wls::{cholesky_solve, solve_wls, WlsProblem};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
