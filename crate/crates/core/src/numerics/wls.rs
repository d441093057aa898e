use crate::error::{Result, SrtError};

/// `min_b sum_i w_i (y_i - x_i.b)^2 + lambda |b|^2`, solved through the normal
/// equations `(X'WX + lambda I) b = X'Wy`. `design` is row-major with `width`
/// columns.
#[derive(Debug, Clone, Copy)]
pub struct WlsProblem<'a> {
    pub design: &'a [f64],
    pub width: usize,
    pub targets: &'a [f64],
    pub weights: &'a [f64],
    pub ridge: f64,
}

const JITTER: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-13;

pub fn solve_wls(problem: &WlsProblem<'_>) -> Result<Vec<f64>> {
    let WlsProblem { design, width: m, targets, weights, ridge } = *problem;
    let n = targets.len();
    if m == 0 || design.len() != n * m || weights.len() != n {
        return Err(SrtError::invalid("weighted least squares dimensions are inconsistent"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || !(ridge >= 0.0) {
        return Err(SrtError::invalid("weights and ridge must be non-negative"));
    }
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for ((row, &y), &w) in design.chunks_exact(m).zip(targets).zip(weights) {
        if w == 0.0 {
            continue;
        }
        for j in 0..m {
            let wx = w * row[j];
            b[j] += wx * y;
            for k in 0..=j {
                a[j * m + k] += wx * row[k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            a[k * m + j] = a[j * m + k];
        }
        a[j * m + j] += ridge;
    }

    match cholesky_solve(&a, m, &b) {
        Some(x) => Ok(x),
        None if ridge > 0.0 => {
            for j in 0..m {
                a[j * m + j] += JITTER;
            }
            cholesky_solve(&a, m, &b)
                .ok_or_else(|| SrtError::SingularSystem("normal equations not positive definite".into()))
        }
        None => Err(SrtError::SingularSystem(
            "normal equations are rank-deficient".into(),
        )),
    }
}

/// Solve `A x = b` for a symmetric positive definite `A` (row-major `n x n`)
/// with one step of iterative refinement. `None` when a pivot falls below a
/// relative tolerance.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > PIVOT_TOL * scale) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    let solve = |rhs: &[f64]| {
        let mut z = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= l[i * n + k] * z[k];
            }
            z[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= l[k * n + i] * z[k];
            }
            z[i] /= l[i * n + i];
        }
        z
    };
    let mut x = solve(b);
    let residual: Vec<f64> = (0..n)
        .map(|i| b[i] - (0..n).map(|k| a[i * n + k] * x[k]).sum::<f64>())
        .collect();
    for (xi, ci) in x.iter_mut().zip(solve(&residual)) {
        *xi += ci;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem<'a>(x: &'a [f64], y: &'a [f64], w: &'a [f64], m: usize, ridge: f64) -> WlsProblem<'a> {
        WlsProblem { design: x, width: m, targets: y, weights: w, ridge }
    }

    #[test]
    fn square_system_interpolates() {
        let x = [1.0, 0.0, 1.0, 1.0];
        let y = [2.0, 5.0];
        let sol = solve_wls(&problem(&x, &y, &[1.0, 1.0], 2, 0.0)).unwrap();
        assert!((sol[0] - 2.0).abs() < 1e-12 && (sol[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let x = [1.0, 0.3, 1.0, 0.9, 1.0, 0.1];
        let y = [1.0, 2.0, 3.0];
        let sol = solve_wls(&problem(&x, &y, &[1.0; 3], 2, 1e12)).unwrap();
        assert!(sol.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let x = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        let y = [1.0, 2.0, 3.0];
        let err = solve_wls(&problem(&x, &y, &[1.0; 3], 2, 0.0)).unwrap_err();
        assert!(matches!(err, SrtError::SingularSystem(_)));
        assert!(solve_wls(&problem(&x, &y, &[1.0; 3], 2, 1e-3)).is_ok());
    }

    #[test]
    fn random_instance_matches_qr() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (n, m) = (20, 4);
        let x: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let ridge = 0.3;
        let sol = solve_wls(&problem(&x, &y, &w, m, ridge)).unwrap();

        // augmented system [sqrt(W) X; sqrt(ridge) I] b = [sqrt(W) y; 0]
        let a = DMatrix::from_fn(n + m, m, |r, c| {
            if r < n { w[r].sqrt() * x[r * m + c] } else if r - n == c { ridge.sqrt() } else { 0.0 }
        });
        let rhs = DVector::from_fn(n + m, |r, _| if r < n { w[r].sqrt() * y[r] } else { 0.0 });
        let qr = a.qr();
        let qtb = qr.q().transpose() * rhs;
        let oracle = qr.r().solve_upper_triangular(&qtb).unwrap();
        for j in 0..m {
            assert!((sol[j] - oracle[j]).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn row_permutation_invariant(seed in any::<u64>(), n in 5usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = 3;
            let x: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let base = solve_wls(&problem(&x, &y, &w, m, 0.01)).unwrap();
            let perm: Vec<usize> = (0..n).rev().collect();
            let px: Vec<f64> = perm.iter().flat_map(|&i| x[i * m..(i + 1) * m].to_vec()).collect();
            let py: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
            let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
            let moved = solve_wls(&problem(&px, &py, &pw, m, 0.01)).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
