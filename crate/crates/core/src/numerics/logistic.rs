use super::{cholesky_solve, dot, norm};
use crate::error::{Result, SrtError};
use crate::model::logistic;

pub const IRLS_MAX_ITERS: usize = 50;
pub const IRLS_GRAD_TOL: f64 = 1e-7;

/// Weighted logistic regression with probabilities `F(mu * coef.z_i)` on
/// augmented rows `z_i` (row-major, `width` columns) and labels in `{0, 1}`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticProblem<'a> {
    pub rows: &'a [f64],
    pub width: usize,
    pub labels: &'a [f64],
    pub weights: &'a [f64],
    pub mu: f64,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the gradient tolerance.
    pub converged: bool,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }
}

/// `-(1/n) sum_i w_i [c_i ln p_i + (1 - c_i) ln(1 - p_i)] + (ridge/2) |coef|^2`.
pub fn logistic_loss(problem: &LogisticProblem<'_>, coef: &[f64]) -> f64 {
    let n = problem.labels.len() as f64;
    let data: f64 = problem
        .rows
        .chunks_exact(problem.width)
        .zip(problem.labels)
        .zip(problem.weights)
        .map(|((z, &c), &w)| {
            let s = problem.mu * dot(coef, z);
            w * (c * softplus(-s) + (1.0 - c) * softplus(s))
        })
        .sum();
    data / n + 0.5 * problem.ridge * dot(coef, coef)
}

fn gradient_hessian(problem: &LogisticProblem<'_>, coef: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = problem.width;
    let n = problem.labels.len() as f64;
    let mu = problem.mu;
    let mut g = vec![0.0; m];
    let mut h = vec![0.0; m * m];
    for ((z, &c), &w) in problem.rows.chunks_exact(m).zip(problem.labels).zip(problem.weights) {
        let p = logistic(mu, dot(coef, z));
        let r = w * mu * (p - c) / n;
        let curv = w * mu * mu * p * (1.0 - p) / n;
        for j in 0..m {
            g[j] += r * z[j];
            for k in 0..=j {
                h[j * m + k] += curv * z[j] * z[k];
            }
        }
    }
    for j in 0..m {
        g[j] += problem.ridge * coef[j];
        for k in 0..j {
            h[k * m + j] = h[j * m + k];
        }
        h[j * m + j] += problem.ridge;
    }
    (g, h)
}

/// Damped Newton (IRLS) from `start` (zeros when `None`) until the gradient norm
/// drops below [`IRLS_GRAD_TOL`] or [`IRLS_MAX_ITERS`] steps; the best iterate is
/// returned with `converged = false` in the latter case.
pub fn fit_logistic(problem: &LogisticProblem<'_>, start: Option<&[f64]>) -> Result<LogisticFit> {
    let m = problem.width;
    let n = problem.labels.len();
    if m == 0 || problem.rows.len() != n * m || problem.weights.len() != n {
        return Err(SrtError::invalid("logistic regression dimensions are inconsistent"));
    }
    if !(problem.mu > 0.0) || !(problem.ridge >= 0.0) {
        return Err(SrtError::invalid("logistic regression needs mu > 0 and ridge >= 0"));
    }
    let (mut w0, mut w1) = (0.0, 0.0);
    for (&c, &w) in problem.labels.iter().zip(problem.weights) {
        if !(w >= 0.0) || !(c == 0.0 || c == 1.0) {
            return Err(SrtError::invalid("labels must be 0/1 and weights non-negative"));
        }
        if c == 1.0 { w1 += w } else { w0 += w }
    }
    if !(w0 > 0.0 && w1 > 0.0) {
        return Err(SrtError::invalid("logistic regression needs both classes with positive weight"));
    }

    let mut coef = match start {
        Some(s) if s.len() == m && s.iter().all(|v| v.is_finite()) => s.to_vec(),
        _ => vec![0.0; m],
    };
    let mut loss = logistic_loss(problem, &coef);
    let mut iterations = 0;
    loop {
        let (g, mut h) = gradient_hessian(problem, &coef);
        let gn = norm(&g);
        if gn < IRLS_GRAD_TOL {
            return Ok(LogisticFit { coef, loss, grad_norm: gn, iterations, converged: true });
        }
        if iterations == IRLS_MAX_ITERS {
            return Ok(LogisticFit { coef, loss, grad_norm: gn, iterations, converged: false });
        }
        let mut step = cholesky_solve(&h, m, &g);
        if step.is_none() {
            let bump = 1e-8 * (0..m).map(|j| h[j * m + j]).fold(1.0, f64::max);
            (0..m).for_each(|j| h[j * m + j] += bump);
            step = cholesky_solve(&h, m, &g);
        }
        let dir: Vec<f64> = match step {
            Some(s) => s.iter().map(|v| -v).collect(),
            None => g.iter().map(|v| -v).collect(),
        };
        let slope = dot(&g, &dir);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = coef.iter().zip(&dir).map(|(c, d)| c + alpha * d).collect();
            let l = logistic_loss(problem, &trial);
            if l <= loss + 1e-4 * alpha * slope {
                coef = trial;
                loss = l;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // no representable decrease left along the Newton direction
            let converged = gn < 1e-5;
            return Ok(LogisticFit { coef, loss, grad_norm: gn, iterations, converged });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn augment(xs: &[f64]) -> Vec<f64> {
        xs.iter().flat_map(|&x| [1.0, x]).collect()
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let xs = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, -0.2, 0.2];
        let labels = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let rows = augment(&xs);
        let prob = LogisticProblem { rows: &rows, width: 2, labels: &labels, weights: &[1.0; 8], mu: 1.0, ridge: 0.0 };
        let fit = fit_logistic(&prob, None).unwrap();
        assert!(fit.converged);
        assert!(fit.coef[0].abs() < 1e-8);
    }

    #[test]
    fn separable_boundary_between_classes() {
        let xs = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
        let labels = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let rows = augment(&xs);
        let prob = LogisticProblem { rows: &rows, width: 2, labels: &labels, weights: &[1.0; 6], mu: 1.0, ridge: 1e-8 };
        let fit = fit_logistic(&prob, None).unwrap();
        let boundary = -fit.coef[0] / fit.coef[1];
        assert!(boundary > 0.3 && boundary < 0.7);
        for (x, c) in xs.iter().zip(&labels) {
            let p = logistic(1.0, fit.coef[0] + fit.coef[1] * x);
            assert_eq!(p >= 0.5, *c == 1.0);
        }
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let xs = [0.0, 0.3, 0.5, 0.6, 0.9, 1.0, 0.4];
        let labels = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let weights = [1.0, 0.5, 2.0, 1.0, 1.5, 1.0, 0.7];
        let rows = augment(&xs);
        let prob = LogisticProblem { rows: &rows, width: 2, labels: &labels, weights: &weights, mu: 2.0, ridge: 1e-3 };
        let fit = fit_logistic(&prob, None).unwrap();
        // analytic gradient recomputed independently
        let mut g = [1e-3 * fit.coef[0], 1e-3 * fit.coef[1]];
        for i in 0..xs.len() {
            let p = 1.0 / (1.0 + (-2.0 * (fit.coef[0] + fit.coef[1] * xs[i])).exp());
            let r = weights[i] * 2.0 * (p - labels[i]) / xs.len() as f64;
            g[0] += r;
            g[1] += r * xs[i];
        }
        assert!((g[0] * g[0] + g[1] * g[1]).sqrt() < 1e-7);
    }

    #[test]
    fn single_class_rejected() {
        let rows = augment(&[0.0, 1.0]);
        let prob = LogisticProblem { rows: &rows, width: 2, labels: &[1.0, 1.0], weights: &[1.0; 2], mu: 1.0, ridge: 0.0 };
        assert!(fit_logistic(&prob, None).is_err());
    }

    #[test]
    fn row_permutation_invariant() {
        let xs = [0.0, 0.3, 0.5, 0.6, 0.9];
        let labels = [1.0, 0.0, 1.0, 0.0, 0.0];
        let rows = augment(&xs);
        let prob = LogisticProblem { rows: &rows, width: 2, labels: &labels, weights: &[1.0; 5], mu: 1.0, ridge: 1e-4 };
        let a = fit_logistic(&prob, None).unwrap();
        let rx: Vec<f64> = xs.iter().rev().copied().collect();
        let rl: Vec<f64> = labels.iter().rev().copied().collect();
        let rrows = augment(&rx);
        let rprob = LogisticProblem { rows: &rrows, labels: &rl, ..prob };
        let b = fit_logistic(&rprob, None).unwrap();
        assert!((a.coef[0] - b.coef[0]).abs() < 1e-6 && (a.coef[1] - b.coef[1]).abs() < 1e-6);
    }
}
