//! Soft regression trees (SRT) whose prediction is the linear model of the single
//! leaf reached by following, at every branch node, the branch with the higher
//! probability.
//!
//! Training minimizes the probability-weighted squared error with a node-based
//! decomposition: each inner iteration picks a branch node, updates the branch
//! parameters of its subtree (steepest-descent reference step, quasi-Newton or
//! weighted-logistic candidate, data point reassignment) and then refits the
//! leaf regressions below it by weighted ridge least squares.
//!
//! ```
//! use srt_core::{data, init, optimizer::{train, TrainConfig}};
//!
//! let raw = data::gen_synthetic(7);
//! let pre = data::PreprocessParams::fit(&raw).unwrap();
//! let ds = pre.apply(&raw).unwrap();
//! let config = TrainConfig { depth: 2, max_macro_iters: 3, ..TrainConfig::default() };
//! let start = init::initialize(&ds, &config, 3, 7).unwrap();
//! let report = train(&ds, &start.params, &config).unwrap();
//! assert!(report.best_error <= report.initial_error);
//! ```

// `!(x > 0.0)` is used deliberately so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod init;
pub mod model;
pub mod numerics;
pub mod optimizer;

pub use data::Dataset;
pub use error::{Result, SrtError};
pub use model::{ModelParams, Regularization, Scope, TreeTopology};
pub use optimizer::{FitReport, StepKind, TrainConfig};
