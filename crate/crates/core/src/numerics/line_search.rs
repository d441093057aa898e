use super::{dot, norm};
use crate::error::{Result, SrtError};

/// Backtracking cap: `m` ranges over `0..=MAX_BACKTRACKS`.
pub const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoStep {
    pub alpha: f64,
    /// Objective at the accepted step.
    pub value: f64,
    /// Number of reductions `m`, so `alpha = a * delta^m`.
    pub backtracks: usize,
}

/// Smallest `m >= 0` with `phi(a delta^m) <= f0 - gamma a delta^m rate`, where
/// `phi(alpha)` is the objective along the search direction and `rate` is the
/// directional decrease `-g.d` (`|g|^2` for steepest descent).
pub fn armijo_backtrack(
    mut phi: impl FnMut(f64) -> f64,
    f0: f64,
    rate: f64,
    a: f64,
    gamma: f64,
    delta: f64,
) -> Result<ArmijoStep> {
    let mut alpha = a;
    for m in 0..=MAX_BACKTRACKS {
        let value = phi(alpha);
        if value <= f0 - gamma * alpha * rate {
            return Ok(ArmijoStep {
                alpha,
                value,
                backtracks: m,
            });
        }
        alpha *= delta;
    }
    Err(SrtError::LineSearchFailure {
        steps: MAX_BACKTRACKS + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            memory: 6,
            grad_tol: 1e-8,
            gamma: 1e-4,
            delta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective after every accepted iteration.
    pub trace: Vec<f64>,
}

/// Limited-memory BFGS with Armijo backtracking. `fg` returns the objective and
/// its gradient. Every accepted iterate strictly decreases the objective; the
/// search stops early when no step along the current direction decreases it.
pub fn lbfgs_minimize(
    mut fg: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    opts: &LbfgsOptions,
) -> LbfgsResult {
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut trace = Vec::new();

    while iterations < opts.max_iters && norm(&g) > opts.grad_tol && f.is_finite() {
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        // first step of a fresh direction is scaled to unit length
        let a = if history.is_empty() { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
        let mut trial = x.clone();
        let mut step = |alpha: f64| {
            for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&d) {
                *t = xi + alpha * di;
            }
            let v = fg(&trial).0;
            if v.is_finite() { v } else { f64::INFINITY }
        };
        let Ok(found) = armijo_backtrack(&mut step, f, -slope, a, opts.gamma, opts.delta) else {
            break;
        };
        if !(found.value < f) {
            break;
        }
        let x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + found.alpha * di).collect();
        let (f_new, g_new) = fg(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == opts.memory {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
        trace.push(f);
    }
    LbfgsResult {
        grad_norm: norm(&g),
        x,
        value: f,
        iterations,
        trace,
    }
}

fn two_loop(g: &[f64], history: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = vec![0.0; history.len()];
    for (i, (s, y, rho)) in history.iter().enumerate().rev() {
        alphas[i] = rho * dot(s, &q);
        for (qj, yj) in q.iter_mut().zip(y) {
            *qj -= alphas[i] * yj;
        }
    }
    if let Some((s, y, _)) = history.last() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for (i, (s, y, rho)) in history.iter().enumerate() {
        let beta = rho * dot(y, &q);
        for (qj, sj) in q.iter_mut().zip(s) {
            *qj += (alphas[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
