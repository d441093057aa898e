use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;

/// Outcome tag of the branch-node phase of one inner iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    SkippedGate,
    ArmijoReference,
    HeuristicBalanced,
    HeuristicWlrModerate,
    HeuristicWlrReassign,
    /// One iteration of the joint baseline solver.
    JointLbfgs,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::SkippedGate => "skipped-gate",
            StepKind::ArmijoReference => "armijo-reference",
            StepKind::HeuristicBalanced => "heuristic-balanced",
            StepKind::HeuristicWlrModerate => "heuristic-wlr-moderate",
            StepKind::HeuristicWlrReassign => "heuristic-wlr-reassign",
            StepKind::JointLbfgs => "joint-lbfgs",
        }
    }

    pub fn is_wlr(self) -> bool {
        matches!(self, StepKind::HeuristicWlrModerate | StepKind::HeuristicWlrReassign)
    }
}

impl std::fmt::Display for StepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which branch of the candidate procedure produced the candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// No point is routed through the node.
    Empty,
    Balanced,
    WlrModerate,
    WlrReassign,
}

impl Regime {
    pub fn is_wlr(self) -> bool {
        matches!(self, Regime::WlrModerate | Regime::WlrReassign)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub macro_it: usize,
    pub node: usize,
    pub kind: StepKind,
    /// Candidate regime, when a candidate was computed.
    pub regime: Option<Regime>,
    /// Convergence conditions enforced at this iteration (`k > k0`).
    pub enforced: bool,
    pub eps1: f64,
    pub n_t: usize,
    pub n_left: usize,
    pub bn_grad_norm: f64,
    pub bn_gate: f64,
    pub armijo_alpha: Option<f64>,
    pub error_after_bn: f64,
    pub error_after_ln: f64,
    pub ln_updated: bool,
    /// Gradient norm over the leaf working set after the leaf phase, measured
    /// on the objective that phase minimized.
    pub ln_grad_norm: Option<f64>,
    pub ln_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub initial_error: f64,
    /// Regularized training error after every inner iteration.
    pub error_trace: Vec<f64>,
    pub step_kinds: Vec<StepKind>,
    pub records: Vec<IterationRecord>,
    pub best_error: f64,
    pub best_params: ModelParams,
    pub final_params: ModelParams,
    pub iterations_run: usize,
    pub macro_iters_run: usize,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

impl FitReport {
    /// One line per inner iteration:
    /// `k macro_it node step_kind E_after_bn E_after_ln`.
    pub fn trace_text(&self) -> String {
        let mut out = String::from("# k macro_it node step_kind E_after_bn E_after_ln\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{} {} {} {} {:.17e} {:.17e}",
                r.k, r.macro_it, r.node, r.kind, r.error_after_bn, r.error_after_ln
            );
        }
        if self.records.is_empty() {
            for (k, (e, kind)) in self.error_trace.iter().zip(&self.step_kinds).enumerate() {
                let _ = writeln!(out, "{k} 0 0 {kind} {e:.17e} {e:.17e}");
            }
        }
        out
    }
}
