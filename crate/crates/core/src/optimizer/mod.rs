//! Node-based decomposition training with data point reassignment, plus a
//! joint-optimization baseline.

mod bn;
mod config;
mod ln;
mod objective;
mod report;
mod train;

pub use bn::{
    armijo_step, bn_step, select_working_set, update_branch_node, wlr_objective, ArmijoOutcome,
    BnOutcome, Candidate, Thresholds, WorkingSet,
};
pub use config::TrainConfig;
pub use ln::{ln_step, LnOutcome};
pub use objective::Subproblem;
pub use report::{FitReport, IterationRecord, Regime, StepKind};
pub use train::{plain_train, threshold_bound_kbar, train, train_observed};
