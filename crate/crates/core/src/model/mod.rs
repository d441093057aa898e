//! Tree topology, parameters, probabilities, HBP prediction, the regularized
//! training error and its gradient, stacking constructors and persistence.

mod eval;
mod params;
mod persist;
mod stack;
mod topology;

pub use eval::{
    branch_probability, leaf_output, logistic, split_argument, HbpPath, NodeGrad, ParamGrad,
    Regularization, Scope, LOG_SPACE_DEPTH,
};
pub use params::ModelParams;
pub use persist::ModelDocument;
pub use stack::{leaf_label_pair, stack_product, stack_sum};
pub use topology::{TreeTopology, MAX_DEPTH};
