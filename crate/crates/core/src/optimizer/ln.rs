use super::objective::Subproblem;
use crate::data::Dataset;
use crate::error::{Result, SrtError};
use crate::model::ModelParams;
use crate::numerics::{solve_wls, WlsProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct LnOutcome {
    /// New beta blocks of the leaf working set, concatenated.
    pub beta: Vec<f64>,
}

/// Exact minimizer of `sub` over the regressions of `leaves`: for each leaf a
/// ridge problem with the leaf probabilities as row weights,
/// `(X'WX + (N lambda_beta / 2) I) beta = X'Wy`.
pub fn ln_step(model: &ModelParams, sub: &Subproblem<'_>, leaves: &[usize]) -> Result<LnOutcome> {
    let data: &Dataset = sub.data();
    let topo = *model.topology();
    let root = sub.root();
    if let Some(&bad) = leaves
        .iter()
        .find(|&&l| !topo.is_leaf(l) || !crate::model::TreeTopology::in_subtree(root, l))
    {
        return Err(SrtError::invalid(format!("leaf {bad} is outside the subproblem")));
    }
    let scope = sub.scope();
    let points: Vec<usize> = match scope.points {
        Some(p) => p.to_vec(),
        None => (0..data.len()).collect(),
    };
    let w = model.width();
    let mut design = Vec::with_capacity(points.len() * w);
    let mut targets = Vec::with_capacity(points.len());
    let mut weights = vec![Vec::with_capacity(points.len()); leaves.len()];
    let mut reach = vec![0.0; 2 * topo.n_leaf()];
    for &i in &points {
        let x = data.row(i);
        model.fill_reach(x, root, &mut reach);
        design.push(1.0);
        design.extend_from_slice(x);
        targets.push(data.targets[i]);
        for (wl, &l) in weights.iter_mut().zip(leaves) {
            wl.push(reach[l]);
        }
    }
    let ridge = data.len() as f64 * sub.reg().lambda_beta / 2.0;
    let mut beta = Vec::with_capacity(leaves.len() * w);
    for (wl, &l) in weights.iter().zip(leaves) {
        let solved = solve_wls(&WlsProblem {
            design: &design,
            width: w,
            targets: &targets,
            weights: wl,
            ridge,
        })
        .map_err(|e| match e {
            SrtError::SingularSystem(msg) => SrtError::SingularSystem(format!("leaf {l}: {msg}")),
            other => other,
        })?;
        beta.extend(solved);
    }
    Ok(LnOutcome { beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Regularization;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line_through_two_points() {
        // root sends everything left with probability ~1
        let mut model = ModelParams::zeros(1, 1, 1.0).unwrap();
        model.omega_block_mut(1)[0] = 60.0;
        let data = Dataset::new(1, vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        let sub = Subproblem::exact(&data, Regularization::NONE);
        let out = ln_step(&model, &sub, &[2]).unwrap();
        assert!((out.beta[0] - 1.0).abs() < 1e-9 && (out.beta[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn large_ridge_shrinks_block() {
        let model = ModelParams::zeros(1, 2, 1.0).unwrap();
        let data = Dataset::new(2, vec![0.1, 0.2, 0.5, 0.9, 0.7, 0.3], vec![1.0, -2.0, 3.0]).unwrap();
        let sub = Subproblem::exact(&data, Regularization::new(0.0, 1e12));
        let out = ln_step(&model, &sub, &[2, 3]).unwrap();
        assert!(out.beta.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn zero_weight_leaf_without_ridge_is_singular() {
        let mut model = ModelParams::zeros(1, 1, 1.0).unwrap();
        model.omega_block_mut(1)[0] = 1e4;
        let data = Dataset::new(1, vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        let sub = Subproblem::exact(&data, Regularization::NONE);
        assert!(matches!(ln_step(&model, &sub, &[3]), Err(SrtError::SingularSystem(_))));
    }

    #[test]
    fn random_instance_matches_dense_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, p) = (20, 3);
        let feats: Vec<f64> = (0..n * p).map(|_| rng.random_range(0.0..1.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = Dataset::new(p, feats, ys).unwrap();
        let mut model = ModelParams::zeros(2, p, 1.0).unwrap();
        for v in model.omega.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let reg = Regularization::new(0.1, 0.05);
        let sub = Subproblem::exact(&data, reg);
        let leaves: Vec<usize> = (4..8).collect();
        let out = ln_step(&model, &sub, &leaves).unwrap();
        for (slot, &l) in leaves.iter().enumerate() {
            let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
            let mut b = DVector::<f64>::zeros(p + 1);
            for i in 0..n {
                let probs = model.leaf_probabilities(data.row(i)).unwrap();
                let wt = probs[l - 4];
                let z = DVector::from_iterator(p + 1, std::iter::once(1.0).chain(data.row(i).iter().copied()));
                a += wt * &z * z.transpose();
                b += wt * data.targets[i] * &z;
            }
            a += DMatrix::identity(p + 1, p + 1) * (n as f64 * reg.lambda_beta / 2.0);
            let oracle = a.lu().solve(&b).unwrap();
            for j in 0..=p {
                assert!((out.beta[slot * (p + 1) + j] - oracle[j]).abs() < 1e-9);
            }
        }
    }
}
