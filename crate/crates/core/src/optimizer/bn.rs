use serde::{Deserialize, Serialize};

use super::objective::Subproblem;
use super::report::{Regime, StepKind};
use super::TrainConfig;
use crate::data::Dataset;
use crate::error::{Result, SrtError};
use crate::model::{ModelParams, Regularization, TreeTopology};
use crate::numerics::{
    armijo_backtrack, fit_logistic, lbfgs_minimize, norm, LbfgsOptions, LogisticProblem,
};

const WLR_RIDGE: f64 = 1e-8;

/// Branch and leaf nodes optimized in one inner iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingSet {
    /// Selected node first, then its descendant branch nodes in heap order.
    pub branches: Vec<usize>,
    pub leaves: Vec<usize>,
}

impl WorkingSet {
    pub fn node(&self) -> usize {
        self.branches[0]
    }
}

/// `W_B = {t} + descendant branch nodes`, `W_L = descendant leaves`, except at
/// the root of a tree deeper than one where only the root split is selected.
pub fn select_working_set(t: usize, topology: &TreeTopology) -> WorkingSet {
    assert!(topology.is_branch(t), "{t} is not a branch node");
    if t == 1 && topology.depth() > 1 {
        return WorkingSet { branches: vec![1], leaves: Vec::new() };
    }
    let mut branches = vec![t];
    branches.extend(topology.descendant_branches(t));
    WorkingSet { branches, leaves: topology.descendant_leaves(t).collect() }
}

/// Current imbalance thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

impl Thresholds {
    pub fn initial(config: &TrainConfig) -> Self {
        Self { eps1: config.eps1_0, eps2: config.eps2_0, eps3: config.eps3_0 }
    }

    pub fn decay(self, zeta: f64) -> Self {
        Self { eps1: zeta * self.eps1, eps2: zeta * self.eps2, eps3: zeta * self.eps3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoOutcome {
    pub alpha: f64,
    /// Gradient of the subproblem over the working set at the start point.
    pub grad: Vec<f64>,
    pub start_value: f64,
    pub value: f64,
    /// `omega_{W_B} - alpha * grad`.
    pub omega: Vec<f64>,
}

/// Steepest-descent reference step over the branch working set with step
/// `a delta^m`, `m` the smallest integer meeting the sufficient-decrease test.
pub fn armijo_step(
    model: &ModelParams,
    sub: &Subproblem<'_>,
    ws: &WorkingSet,
    config: &TrainConfig,
) -> Result<ArmijoOutcome> {
    let grad = sub.branch_grad(model, &ws.branches);
    armijo_with_grad(model, sub, ws, config, grad)
}

fn armijo_with_grad(
    model: &ModelParams,
    sub: &Subproblem<'_>,
    ws: &WorkingSet,
    config: &TrainConfig,
    grad: Vec<f64>,
) -> Result<ArmijoOutcome> {
    let start = model.gather_omega(&ws.branches);
    let start_value = sub.value(model);
    let rate: f64 = grad.iter().map(|g| g * g).sum();
    if !(rate > 0.0) {
        return Err(SrtError::invalid("Armijo step needs a non-zero gradient"));
    }
    let mut scratch = model.clone();
    let mut trial = start.clone();
    let step = armijo_backtrack(
        |alpha| {
            for ((t, s), g) in trial.iter_mut().zip(&start).zip(&grad) {
                *t = s - alpha * g;
            }
            scratch.scatter_omega(&ws.branches, &trial);
            sub.value(&scratch)
        },
        start_value,
        rate,
        config.armijo_a,
        config.armijo_gamma,
        config.armijo_delta,
    )?;
    let omega = start.iter().zip(&grad).map(|(s, g)| s - step.alpha * g).collect();
    Ok(ArmijoOutcome { alpha: step.alpha, grad, start_value, value: step.value, omega })
}

/// Weighted logistic objective of branch node `t`'s split on `points`:
/// `-(1/N_t) sum_i w_i [c_i ln p_i + (1 - c_i) ln(1 - p_i)]` with
/// `c_i = 1` for `go_left[i]` and class-balancing weights `N_t / (2 N_class)`.
pub fn wlr_objective(
    data: &Dataset,
    points: &[usize],
    go_left: &[bool],
    omega_t: &[f64],
    mu: f64,
) -> Result<f64> {
    let (rows, labels, weights) = wlr_inputs(data, points, go_left)?;
    let problem = LogisticProblem {
        rows: &rows,
        width: omega_t.len(),
        labels: &labels,
        weights: &weights,
        mu,
        ridge: 0.0,
    };
    Ok(crate::numerics::logistic_loss(&problem, omega_t))
}

#[allow(clippy::type_complexity)]
fn wlr_inputs(
    data: &Dataset,
    points: &[usize],
    go_left: &[bool],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if points.len() != go_left.len() {
        return Err(SrtError::invalid("one label per point is required"));
    }
    let n_t = points.len();
    let n_left = go_left.iter().filter(|&&l| l).count();
    let n_right = n_t - n_left;
    if n_left == 0 || n_right == 0 {
        return Err(SrtError::DegenerateWeights(format!(
            "weighted logistic objective needs both classes (left {n_left}, right {n_right})"
        )));
    }
    let inv_p = 1.0 / data.n_features() as f64;
    let mut rows = Vec::with_capacity(n_t * (data.n_features() + 1));
    for &i in points {
        rows.push(1.0);
        rows.extend(data.row(i).iter().map(|v| v * inv_p));
    }
    let labels = go_left.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let (wl, wr) = (n_t as f64 / (2 * n_left) as f64, n_t as f64 / (2 * n_right) as f64);
    let weights = go_left.iter().map(|&l| if l { wl } else { wr }).collect();
    Ok((rows, labels, weights))
}

/// Candidate produced by the branch-node update procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub regime: Regime,
    /// New omega blocks of the working set (concatenated); `None` when no
    /// candidate could be formed.
    pub omega: Option<Vec<f64>>,
    pub n_t: usize,
    pub n_left: usize,
    /// Points whose target side was flipped before the logistic fit.
    pub flipped: Vec<usize>,
}

/// Candidate update of the branch working set: a quasi-Newton minimization of
/// the subproblem when the routing through `t` is balanced, a weighted
/// logistic refit of `omega_t` alone when it is imbalanced, preceded by flipping
/// the side of the largest-residual points of the fuller child when the
/// imbalance is high.
pub fn update_branch_node(
    model: &ModelParams,
    data: &Dataset,
    reg: Regularization,
    ws: &WorkingSet,
    eps: Thresholds,
    config: &TrainConfig,
) -> Result<Candidate> {
    let t = ws.node();
    let topo = *model.topology();
    let shift = topo.depth() - TreeTopology::level(t);
    let mut points = Vec::new();
    let mut went_left = Vec::new();
    for (i, x) in data.rows().enumerate() {
        let leaf = model.hbp_leaf_from(x, 1);
        if leaf >> shift == t {
            points.push(i);
            went_left.push(leaf >> (shift - 1) == 2 * t);
        }
    }
    let n_t = points.len();
    let n_left = went_left.iter().filter(|&&l| l).count();
    let mut cand = Candidate { regime: Regime::Empty, omega: None, n_t, n_left, flipped: Vec::new() };
    if n_t == 0 {
        return Ok(cand);
    }

    let ratio = n_left as f64 / n_t as f64;
    let imbalanced = !config.no_reassign
        && (ratio <= eps.eps1 || ratio >= 1.0 - eps.eps1)
        && eps.eps1 * data.len() as f64 >= 1.0;

    if !imbalanced {
        cand.regime = Regime::Balanced;
        let sub = Subproblem::select(config.subtree_proxy, model, data, reg, t);
        let start = model.gather_omega(&ws.branches);
        let opts = LbfgsOptions {
            max_iters: config.balanced_max_iters,
            gamma: config.armijo_gamma,
            delta: config.armijo_delta,
            ..LbfgsOptions::default()
        };
        let res = lbfgs_minimize(sub.branch_fn(model, ws), &start, &opts);
        cand.omega = Some(res.x);
        return Ok(cand);
    }

    let mut labels = went_left.clone();
    if ratio <= eps.eps2 || ratio >= 1.0 - eps.eps2 {
        cand.regime = Regime::WlrReassign;
        let fuller_left = n_left >= n_t - n_left;
        let n_max = if fuller_left { n_left } else { n_t - n_left };
        let count = (n_max as f64 * eps.eps3).floor() as usize;
        let mut ranked: Vec<(f64, usize)> = points
            .iter()
            .zip(&went_left)
            .enumerate()
            .filter(|(_, (_, &l))| l == fuller_left)
            .map(|(pos, (&i, _))| (model.partial_residual(data, i, t, config.subtree_proxy), pos))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, pos) in ranked.iter().take(count) {
            labels[pos] = !labels[pos];
            cand.flipped.push(points[pos]);
        }
    } else {
        cand.regime = Regime::WlrModerate;
    }

    let (rows, c, w) = match wlr_inputs(data, &points, &labels) {
        Ok(v) => v,
        Err(SrtError::DegenerateWeights(_)) => return Ok(cand),
        Err(e) => return Err(e),
    };
    let problem = LogisticProblem {
        rows: &rows,
        width: model.width(),
        labels: &c,
        weights: &w,
        mu: model.mu,
        ridge: WLR_RIDGE,
    };
    let fit = fit_logistic(&problem, Some(model.omega_block(t)))?;
    if !fit.converged {
        log::debug!("weighted logistic fit at node {t} stopped at gradient {:.3e}", fit.grad_norm);
    }
    let mut omega = model.gather_omega(&ws.branches);
    omega[..model.width()].copy_from_slice(&fit.coef);
    cand.omega = Some(omega);
    Ok(cand)
}

/// Result of the branch-node phase.
#[derive(Debug, Clone, PartialEq)]
pub struct BnOutcome {
    pub kind: StepKind,
    pub regime: Option<Regime>,
    pub grad_norm: f64,
    pub gate: f64,
    pub armijo_alpha: Option<f64>,
    pub n_t: usize,
    pub n_left: usize,
}

/// Branch-node phase of inner iteration `k`. Skips when the working-set
/// gradient is within `theta_omega^k`; otherwise takes the candidate when
/// `enforce` is off, or when it beats the Armijo reference and decreases the
/// error by at least `tau |omega_hat - omega|^2`.
#[allow(clippy::too_many_arguments)]
pub fn bn_step(
    model: &mut ModelParams,
    data: &Dataset,
    reg: Regularization,
    ws: &WorkingSet,
    k: usize,
    enforce: bool,
    eps: Thresholds,
    config: &TrainConfig,
) -> Result<BnOutcome> {
    let t = ws.node();
    let sub = Subproblem::select(config.subtree_proxy && !enforce, model, data, reg, t);
    let grad = sub.branch_grad(model, &ws.branches);
    let grad_norm = norm(&grad);
    let gate = config.theta_omega.powi(k.min(i32::MAX as usize) as i32);
    let mut out = BnOutcome {
        kind: StepKind::SkippedGate,
        regime: None,
        grad_norm,
        gate,
        armijo_alpha: None,
        n_t: 0,
        n_left: 0,
    };
    if grad_norm <= gate {
        return Ok(out);
    }
    let f0 = sub.value(model);
    // a gradient whose full Armijo decrease is below the resolution of E is
    // numerically zero
    if config.armijo_gamma * config.armijo_a * grad_norm * grad_norm <= 4.0 * f64::EPSILON * f0.abs() {
        return Ok(out);
    }
    let reference = armijo_with_grad(model, &sub, ws, config, grad)?;
    out.armijo_alpha = Some(reference.alpha);

    let cand = update_branch_node(model, data, reg, ws, eps, config)?;
    out.regime = Some(cand.regime);
    out.n_t = cand.n_t;
    out.n_left = cand.n_left;

    let heuristic_kind = match cand.regime {
        Regime::Balanced => StepKind::HeuristicBalanced,
        Regime::WlrModerate => StepKind::HeuristicWlrModerate,
        Regime::WlrReassign => StepKind::HeuristicWlrReassign,
        Regime::Empty => StepKind::ArmijoReference,
    };
    let accept = match &cand.omega {
        None => false,
        Some(_) if !enforce => true,
        Some(hat) => {
            let current = model.gather_omega(&ws.branches);
            let mut trial = model.clone();
            trial.scatter_omega(&ws.branches, hat);
            let e_hat = sub.value(&trial);
            let dist2: f64 = hat.iter().zip(&current).map(|(a, b)| (a - b).powi(2)).sum();
            e_hat <= reference.value && e_hat <= reference.start_value - config.tau * dist2
        }
    };
    if accept {
        model.scatter_omega(&ws.branches, cand.omega.as_ref().expect("accepted candidate"));
        out.kind = heuristic_kind;
    } else {
        model.scatter_omega(&ws.branches, &reference.omega);
        out.kind = StepKind::ArmijoReference;
    }
    Ok(out)
}
