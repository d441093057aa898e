use std::time::Instant;

use super::bn::{bn_step, select_working_set, Thresholds};
use super::ln::ln_step;
use super::objective::Subproblem;
use super::report::{FitReport, IterationRecord, StepKind};
use super::TrainConfig;
use crate::data::Dataset;
use crate::error::{Result, SrtError};
use crate::model::ModelParams;
use crate::numerics::{lbfgs_minimize, LbfgsOptions};

/// Inner iterations after which the imbalance gate `eps1 N >= 1` can no longer
/// hold: `ceil(ln(N eps1_0) / -ln zeta) * 2^(D-1)`; 0 when `N eps1_0 <= 1`.
pub fn threshold_bound_kbar(n: usize, eps1_0: f64, zeta: f64, depth: usize) -> usize {
    let scaled = n as f64 * eps1_0;
    if scaled <= 1.0 {
        return 0;
    }
    let macros = (scaled.ln() / -zeta.ln()).ceil() as usize;
    macros * (1usize << (depth - 1))
}

fn check_start(data: &Dataset, init: &ModelParams, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if data.is_empty() {
        return Err(SrtError::EmptyDataset);
    }
    data.check_finite()?;
    init.validate()?;
    if init.depth() != config.depth {
        return Err(SrtError::invalid(format!(
            "initial model has depth {}, config asks for {}",
            init.depth(),
            config.depth
        )));
    }
    if init.n_features() != data.n_features() {
        return Err(SrtError::invalid(format!(
            "initial model has {} features, dataset has {}",
            init.n_features(),
            data.n_features()
        )));
    }
    if init.mu != config.mu {
        return Err(SrtError::invalid("initial model mu differs from config mu"));
    }
    Ok(())
}

/// Decomposition training from `init`; returns the best iterate by training
/// error together with the full iteration trace.
pub fn train(data: &Dataset, init: &ModelParams, config: &TrainConfig) -> Result<FitReport> {
    train_observed(data, init, config, |_, _| {})
}

/// [`train`] calling `observer` with the record and the model state after
/// every inner iteration.
pub fn train_observed(
    data: &Dataset,
    init: &ModelParams,
    config: &TrainConfig,
    mut observer: impl FnMut(&IterationRecord, &ModelParams),
) -> Result<FitReport> {
    check_start(data, init, config)?;
    let started = Instant::now();
    let reg = config.regularization(data.n_features());
    let topo = *init.topology();
    let k0 = config.effective_k0();
    let exact = Subproblem::exact(data, reg);

    let mut model = init.clone();
    let initial_error = exact.value(&model);
    let mut best_error = initial_error;
    let mut best_params = model.clone();
    let mut eps = Thresholds::initial(config);
    let mut records = Vec::new();
    let mut k = 0usize;
    let mut current = initial_error;
    let mut macro_iters_run = 0;

    for macro_it in 0..config.max_macro_iters {
        let macro_start = current;
        let mut attempted = false;
        for t in topo.branch_nodes() {
            let ws = select_working_set(t, &topo);
            let enforce = (k as i64) > k0;
            let bn = bn_step(&mut model, data, reg, &ws, k, enforce, eps, config)?;
            let error_after_bn = exact.value(&model);

            let ln_tolerance = config.upsilon.powi(k.min(i32::MAX as usize) as i32);
            let mut ln_updated = false;
            let mut ln_grad_norm = None;
            let mut error_after_ln = error_after_bn;
            if !ws.leaves.is_empty() {
                let sub = Subproblem::select(config.subtree_proxy && !enforce, &model, data, reg, t);
                let gate = config.theta_beta.powi(k.min(i32::MAX as usize) as i32);
                let before = sub.leaf_grad_norm(&model, &ws.leaves);
                let solved = if before > gate {
                    match ln_step(&model, &sub, &ws.leaves) {
                        Ok(ln) => Some(ln),
                        Err(SrtError::SingularSystem(msg)) if reg.lambda_beta == 0.0 => {
                            log::warn!("leaf step skipped at k={k}: {msg}");
                            None
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    None
                };
                if let Some(ln) = solved {
                    let mut trial = model.clone();
                    for (chunk, &l) in ln.beta.chunks_exact(model.width()).zip(&ws.leaves) {
                        trial.beta_block_mut(l).copy_from_slice(chunk);
                    }
                    let e_trial = exact.value(&trial);
                    // rounding can make the exact minimizer look marginally worse
                    if !enforce || e_trial <= error_after_bn {
                        model = trial;
                        error_after_ln = e_trial;
                        ln_updated = true;
                    }
                }
                ln_grad_norm = Some(sub.leaf_grad_norm(&model, &ws.leaves));
            }

            let record = IterationRecord {
                k,
                macro_it,
                node: t,
                kind: bn.kind,
                regime: bn.regime,
                enforced: enforce,
                eps1: eps.eps1,
                n_t: bn.n_t,
                n_left: bn.n_left,
                bn_grad_norm: bn.grad_norm,
                bn_gate: bn.gate,
                armijo_alpha: bn.armijo_alpha,
                error_after_bn,
                error_after_ln,
                ln_updated,
                ln_grad_norm,
                ln_tolerance,
            };
            attempted |= bn.kind != StepKind::SkippedGate || ln_updated;
            observer(&record, &model);
            records.push(record);
            if error_after_ln < best_error {
                best_error = error_after_ln;
                best_params = model.clone();
            }
            current = error_after_ln;
            k += 1;
        }
        eps = eps.decay(config.zeta);
        macro_iters_run += 1;
        // a sweep where every gate held says nothing about stationarity
        let change = (macro_start - current).abs();
        if attempted && change <= config.termination_tol * macro_start.abs() {
            log::debug!("stopping after macro iteration {macro_it}: error change {change:.3e}");
            break;
        }
    }

    Ok(FitReport {
        initial_error,
        error_trace: records.iter().map(|r| r.error_after_ln).collect(),
        step_kinds: records.iter().map(|r| r.kind).collect(),
        iterations_run: records.len(),
        records,
        best_error,
        best_params,
        final_params: model,
        macro_iters_run,
        wall_time: started.elapsed(),
    })
}

/// Joint baseline: limited-memory quasi-Newton over all parameters of the
/// exact error, with a budget of `max_macro_iters * |tau_B| * balanced_max_iters`
/// iterations or until the gradient norm drops below `1e-8`.
pub fn plain_train(data: &Dataset, init: &ModelParams, config: &TrainConfig) -> Result<FitReport> {
    check_start(data, init, config)?;
    let started = Instant::now();
    let reg = config.regularization(data.n_features());
    let n_omega = init.omega.len();
    let mut scratch = init.clone();
    let fg = |flat: &[f64]| {
        scratch.omega.copy_from_slice(&flat[..n_omega]);
        scratch.beta.copy_from_slice(&flat[n_omega..]);
        let g = scratch.scoped_gradient(data, reg, crate::model::Scope::FULL);
        let f = scratch.scoped_error(data, reg, crate::model::Scope::FULL);
        (f, g.omega.iter().chain(&g.beta).copied().collect())
    };
    let start: Vec<f64> = init.omega.iter().chain(&init.beta).copied().collect();
    let opts = LbfgsOptions {
        max_iters: config.max_macro_iters * init.topology().n_branch() * config.balanced_max_iters,
        grad_tol: 1e-8,
        gamma: config.armijo_gamma,
        delta: config.armijo_delta,
        ..LbfgsOptions::default()
    };
    let initial_error = init.training_error(data, reg)?;
    let res = lbfgs_minimize(fg, &start, &opts);
    let mut model = init.clone();
    model.omega.copy_from_slice(&res.x[..n_omega]);
    model.beta.copy_from_slice(&res.x[n_omega..]);
    let best_error = res.value.min(initial_error);
    let best_params = if res.value <= initial_error { model.clone() } else { init.clone() };
    Ok(FitReport {
        initial_error,
        step_kinds: vec![StepKind::JointLbfgs; res.trace.len()],
        iterations_run: res.trace.len(),
        error_trace: res.trace,
        records: Vec::new(),
        best_error,
        best_params,
        final_params: model,
        macro_iters_run: 0,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, PreprocessParams};
    use crate::optimizer::select_working_set;
    use crate::model::TreeTopology;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kbar_examples() {
        assert_eq!(threshold_bound_kbar(1500, 0.1, 0.8, 2), 46);
        assert_eq!(threshold_bound_kbar(10, 0.1, 0.8, 2), 0);
        for n in [100usize, 1000, 5000] {
            let step = ((2f64).ln() / -(0.8f64).ln()).ceil() as usize * 2;
            let grow = threshold_bound_kbar(2 * n, 0.1, 0.8, 2) - threshold_bound_kbar(n, 0.1, 0.8, 2);
            assert!(grow <= step);
        }
    }

    #[test]
    fn working_sets() {
        let d3 = TreeTopology::new(3).unwrap();
        let ws = select_working_set(3, &d3);
        assert_eq!(ws.branches, vec![3, 6, 7]);
        assert_eq!(ws.leaves, vec![12, 13, 14, 15]);
        let d2 = TreeTopology::new(2).unwrap();
        let root = select_working_set(1, &d2);
        assert_eq!((root.branches, root.leaves), (vec![1], vec![]));
        let d1 = TreeTopology::new(1).unwrap();
        let root = select_working_set(1, &d1);
        assert_eq!((root.branches, root.leaves), (vec![1], vec![2, 3]));
    }

    fn small_problem(seed: u64) -> (Dataset, ModelParams) {
        let raw = gen_synthetic(seed).subset(&(0..1500).step_by(10).collect::<Vec<_>>());
        let ds = PreprocessParams::fit(&raw).unwrap().apply(&raw).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = ModelParams::zeros(2, 3, 1.0).unwrap();
        for v in model.omega.iter_mut().chain(model.beta.iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
        (ds, model)
    }

    #[test]
    fn zero_macro_iterations_returns_init() {
        let (ds, model) = small_problem(1);
        let cfg = TrainConfig { max_macro_iters: 0, ..TrainConfig::default() };
        let rep = train(&ds, &model, &cfg).unwrap();
        assert!(rep.error_trace.is_empty());
        assert_eq!(rep.best_params, model);
        assert_eq!(rep.best_error, rep.initial_error);
    }

    #[test]
    fn enforced_run_is_monotone() {
        let (ds, model) = small_problem(2);
        let cfg = TrainConfig { k0: Some(-1), ..TrainConfig::default() };
        let rep = train(&ds, &model, &cfg).unwrap();
        let mut prev = rep.initial_error;
        for r in &rep.records {
            assert!(r.error_after_bn <= prev);
            assert!(r.error_after_ln <= r.error_after_bn);
            prev = r.error_after_ln;
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (ds, model) = small_problem(3);
        let cfg = TrainConfig::default();
        let a = train(&ds, &model, &cfg).unwrap();
        let b = train(&ds, &model, &cfg).unwrap();
        assert_eq!(a.error_trace, b.error_trace);
        assert_eq!(a.best_params, b.best_params);
    }

    #[test]
    fn plain_trace_is_monotone() {
        let (ds, model) = small_problem(4);
        let cfg = TrainConfig { max_macro_iters: 2, ..TrainConfig::default() };
        let rep = plain_train(&ds, &model, &cfg).unwrap();
        let mut prev = rep.initial_error;
        for &e in &rep.error_trace {
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn depth_mismatch_rejected() {
        let (ds, model) = small_problem(5);
        let cfg = TrainConfig { depth: 3, ..TrainConfig::default() };
        assert!(matches!(train(&ds, &model, &cfg), Err(SrtError::InvalidInput(_))));
    }
}
