use serde::{Deserialize, Serialize};

use super::{ModelParams, TreeTopology};
use crate::data::Dataset;
use crate::error::{Result, SrtError};

/// From this depth on, path probabilities are accumulated as logarithms.
pub const LOG_SPACE_DEPTH: usize = 8;

/// Logistic CDF `F(u) = 1 / (1 + exp(-mu u))`, evaluated without overflow.
#[inline]
pub fn logistic(mu: f64, u: f64) -> f64 {
    let z = mu * u;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Split argument `omega_0 + (1/p) sum_j omega_j x_j`.
#[inline]
pub fn split_argument(omega_t: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(omega_t.len(), x.len() + 1);
    let dot: f64 = omega_t[1..].iter().zip(x).map(|(w, v)| w * v).sum();
    omega_t[0] + dot / x.len() as f64
}

/// Leaf regression `beta_0 + sum_j beta_j x_j`.
#[inline]
pub fn leaf_output(beta_t: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(beta_t.len(), x.len() + 1);
    beta_t[0] + beta_t[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Probability of taking the left branch at a node with split vector `omega_t`.
pub fn branch_probability(omega_t: &[f64], x: &[f64], mu: f64) -> Result<f64> {
    if x.is_empty() || omega_t.len() != x.len() + 1 {
        return Err(SrtError::invalid(format!(
            "split vector of length {} does not match {} features",
            omega_t.len(),
            x.len()
        )));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(SrtError::invalid("mu must be positive and finite"));
    }
    if omega_t.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(SrtError::invalid("non-finite split vector or feature value"));
    }
    Ok(logistic(mu, split_argument(omega_t, x)))
}

/// Highest-branch-probability path of one input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HbpPath {
    pub leaf: usize,
    /// `true` for every branch node where the path turns left, root first.
    pub went_left: Vec<bool>,
}

/// Penalty weights of the regularized error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Regularization {
    pub lambda_omega: f64,
    pub lambda_beta: f64,
}

impl Regularization {
    pub const NONE: Regularization = Regularization {
        lambda_omega: 0.0,
        lambda_beta: 0.0,
    };

    pub fn new(lambda_omega: f64, lambda_beta: f64) -> Self {
        Self {
            lambda_omega,
            lambda_beta,
        }
    }
}

/// Which part of the error function an evaluation covers.
///
/// The full objective is the subtree of the root over every data point. A
/// subtree scope treats `root` as if it were the root of the tree (the branch
/// probabilities above it are fixed to 1), keeps only the leaves below it and,
/// when `points` is given, only those data points. The `1/N` factor always uses
/// the size of the whole dataset; the penalty covers the nodes of the subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope<'a> {
    pub root: usize,
    pub points: Option<&'a [usize]>,
}

impl<'a> Scope<'a> {
    pub const FULL: Scope<'static> = Scope {
        root: 1,
        points: None,
    };

    pub fn subtree(root: usize, points: &'a [usize]) -> Self {
        Self {
            root,
            points: Some(points),
        }
    }
}

/// Gradient with the same node-major layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub omega: Vec<f64>,
    pub beta: Vec<f64>,
    width: usize,
    first_leaf: usize,
}

impl ParamGrad {
    pub fn omega_block(&self, t: usize) -> &[f64] {
        &self.omega[(t - 1) * self.width..t * self.width]
    }

    pub fn beta_block(&self, t: usize) -> &[f64] {
        let s = t - self.first_leaf;
        &self.beta[s * self.width..(s + 1) * self.width]
    }

    pub fn gather_omega(&self, nodes: &[usize]) -> Vec<f64> {
        nodes
            .iter()
            .flat_map(|&t| self.omega_block(t).iter().copied())
            .collect()
    }

    pub fn omega_norm(&self, nodes: &[usize]) -> f64 {
        nodes
            .iter()
            .flat_map(|&t| self.omega_block(t))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn beta_norm(&self, leaves: &[usize]) -> f64 {
        leaves
            .iter()
            .flat_map(|&t| self.beta_block(t))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Gradient block of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrad {
    pub node: usize,
    pub grad: Vec<f64>,
}

impl ModelParams {
    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(SrtError::invalid(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SrtError::invalid("non-finite feature value"));
        }
        Ok(())
    }

    pub(crate) fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.n_features() {
            return Err(SrtError::invalid(format!(
                "dataset has {} features, model expects {}",
                data.n_features(),
                self.n_features()
            )));
        }
        Ok(())
    }

    /// Left-branch probability at branch node `t`.
    pub fn branch_probability(&self, t: usize, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        if !self.topology().is_branch(t) {
            return Err(SrtError::invalid(format!("{t} is not a branch node")));
        }
        branch_probability(self.omega_block(t), x, self.mu)
    }

    /// Probabilities `P_t` of falling into every leaf, leftmost leaf first.
    pub fn leaf_probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let topo = *self.topology();
        let mut reach = vec![0.0; 2 * topo.n_leaf()];
        self.fill_reach(x, 1, &mut reach);
        Ok(reach[topo.leaf_nodes()].to_vec())
    }

    /// Fill `reach[node]` with the probability of reaching `node` from `root`
    /// for every node of the subtree (with `reach[root] = 1`). `reach` is indexed
    /// by heap number.
    pub(crate) fn fill_reach(&self, x: &[f64], root: usize, reach: &mut [f64]) {
        let topo = self.topology();
        let first_leaf = topo.first_leaf();
        if topo.depth() >= LOG_SPACE_DEPTH {
            reach[root] = 0.0;
            self.walk_subtree(root, first_leaf, |t| {
                let z = self.mu * split_argument(self.omega_block(t), x);
                let base = reach[t];
                reach[2 * t] = base - softplus(-z);
                reach[2 * t + 1] = base - softplus(z);
            });
            for t in topo.descendant_leaves(root) {
                reach[t] = reach[t].exp();
            }
        } else {
            reach[root] = 1.0;
            self.walk_subtree(root, first_leaf, |t| {
                let p = logistic(self.mu, split_argument(self.omega_block(t), x));
                let base = reach[t];
                reach[2 * t] = base * p;
                reach[2 * t + 1] = base * (1.0 - p);
            });
        }
    }

    /// Visit the branch nodes of the subtree of `root` level by level.
    fn walk_subtree(&self, root: usize, first_leaf: usize, mut visit: impl FnMut(usize)) {
        let mut lo = root;
        let mut width = 1;
        while lo < first_leaf {
            for t in lo..lo + width {
                visit(t);
            }
            lo *= 2;
            width *= 2;
        }
    }

    /// Leaf reached by HBP routing from `root`: left whenever the left-branch
    /// probability is at least 0.5, i.e. whenever the split argument is `>= 0`.
    #[inline]
    pub(crate) fn hbp_leaf_from(&self, x: &[f64], root: usize) -> usize {
        let first_leaf = self.topology().first_leaf();
        let mut t = root;
        while t < first_leaf {
            let left = split_argument(self.omega_block(t), x) >= 0.0;
            t = if left { 2 * t } else { 2 * t + 1 };
        }
        t
    }

    pub fn hbp_path(&self, x: &[f64]) -> Result<HbpPath> {
        self.check_input(x)?;
        let first_leaf = self.topology().first_leaf();
        let mut went_left = Vec::with_capacity(self.depth());
        let mut t = 1;
        while t < first_leaf {
            let left = split_argument(self.omega_block(t), x) >= 0.0;
            went_left.push(left);
            t = if left { 2 * t } else { 2 * t + 1 };
        }
        Ok(HbpPath { leaf: t, went_left })
    }

    /// Deterministic prediction: the regression of the HBP leaf.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let leaf = self.hbp_leaf_from(x, 1);
        Ok(leaf_output(self.beta_block(leaf), x))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_dataset(data)?;
        Ok(data
            .rows()
            .map(|x| leaf_output(self.beta_block(self.hbp_leaf_from(x, 1)), x))
            .collect())
    }

    /// HBP leaf of every row.
    pub fn route_dataset(&self, data: &Dataset) -> Vec<usize> {
        data.rows().map(|x| self.hbp_leaf_from(x, 1)).collect()
    }

    /// Indices of the points whose HBP path contains node `t`, in ascending order.
    pub fn points_through(&self, data: &Dataset, t: usize) -> Vec<usize> {
        let shift = self.depth() - TreeTopology::level(t);
        data.rows()
            .enumerate()
            .filter(|(_, x)| self.hbp_leaf_from(x, 1) >> shift == t)
            .map(|(i, _)| i)
            .collect()
    }

    /// Penalty of the nodes in the subtree of `root`.
    pub fn penalty(&self, reg: Regularization, root: usize) -> f64 {
        let topo = self.topology();
        let mut omega_sq = 0.0;
        if topo.is_branch(root) {
            for t in std::iter::once(root).chain(topo.descendant_branches(root)) {
                omega_sq += self.omega_block(t).iter().map(|v| v * v).sum::<f64>();
            }
        }
        let beta_sq: f64 = topo
            .descendant_leaves(root)
            .map(|t| self.beta_block(t).iter().map(|v| v * v).sum::<f64>())
            .sum();
        0.5 * reg.lambda_omega * omega_sq + 0.5 * reg.lambda_beta * beta_sq
    }

    /// Probability-weighted squared error of the scope plus its penalty.
    pub fn scoped_error(&self, data: &Dataset, reg: Regularization, scope: Scope<'_>) -> f64 {
        let topo = *self.topology();
        let mut reach = vec![0.0; 2 * topo.n_leaf()];
        let leaves = topo.descendant_leaves(scope.root);
        let mut data_term = 0.0;
        let mut point = |i: usize| {
            let x = data.row(i);
            self.fill_reach(x, scope.root, &mut reach);
            let y = data.targets[i];
            for t in leaves.clone() {
                let r = leaf_output(self.beta_block(t), x) - y;
                data_term += reach[t] * r * r;
            }
        };
        match scope.points {
            Some(points) => points.iter().for_each(|&i| point(i)),
            None => (0..data.len()).for_each(&mut point),
        }
        data_term / data.len() as f64 + self.penalty(reg, scope.root)
    }

    /// Regularized training error over the whole tree and dataset.
    pub fn training_error(&self, data: &Dataset, reg: Regularization) -> Result<f64> {
        if data.is_empty() {
            return Err(SrtError::EmptyDataset);
        }
        self.check_dataset(data)?;
        if reg.lambda_omega < 0.0 || reg.lambda_beta < 0.0 {
            return Err(SrtError::invalid("regularizers must be non-negative"));
        }
        Ok(self.scoped_error(data, reg, Scope::FULL))
    }

    /// Error term of point `i` restricted to the leaves below `t`:
    /// `sum_{l in D_L(t)} P_il (yhat_il - y_i)^2`. With `treat_as_root` the
    /// probabilities are those of the subtree rooted at `t`; otherwise they are
    /// the probabilities of the full tree.
    pub fn partial_residual(&self, data: &Dataset, i: usize, t: usize, treat_as_root: bool) -> f64 {
        let topo = *self.topology();
        let mut reach = vec![0.0; 2 * topo.n_leaf()];
        let x = data.row(i);
        self.fill_reach(x, if treat_as_root { t } else { 1 }, &mut reach);
        let y = data.targets[i];
        topo.descendant_leaves(t)
            .map(|l| {
                let r = leaf_output(self.beta_block(l), x) - y;
                reach[l] * r * r
            })
            .sum()
    }

    /// Analytical gradient of [`scoped_error`](Self::scoped_error); entries of
    /// nodes outside the scope are zero.
    ///
    /// With `s_l = P_l r_l^2` and `S(n)` the sum of `s_l` over the leaves below
    /// node `n`, the data part for branch node `b` is
    /// `(mu/N) sum_i [(1 - p_b) S(2b) - p_b S(2b+1)] z_i` where
    /// `z_i = (1, x_i / p)`, and for leaf `l` it is `(2/N) sum_i P_l r_l (1, x_i)`.
    pub fn scoped_gradient(&self, data: &Dataset, reg: Regularization, scope: Scope<'_>) -> ParamGrad {
        let topo = *self.topology();
        let w = self.width();
        let p = self.n_features();
        let inv_p = 1.0 / p as f64;
        let first_leaf = topo.first_leaf();
        let mut grad = ParamGrad {
            omega: vec![0.0; self.omega.len()],
            beta: vec![0.0; self.beta.len()],
            width: w,
            first_leaf,
        };
        let mut reach = vec![0.0; 2 * first_leaf];
        let mut below = vec![0.0; 2 * first_leaf];
        let root = scope.root;
        let leaves = topo.descendant_leaves(root);
        let mut branches = Vec::new();
        if topo.is_branch(root) {
            branches.push(root);
            branches.extend(topo.descendant_branches(root));
        }
        let n = data.len() as f64;

        let mut point = |i: usize| {
            let x = data.row(i);
            let y = data.targets[i];
            self.fill_reach(x, root, &mut reach);
            for t in leaves.clone() {
                let r = leaf_output(self.beta_block(t), x) - y;
                let pl = reach[t];
                below[t] = pl * r * r;
                let coef = 2.0 * pl * r / n;
                let g = &mut grad.beta[(t - first_leaf) * w..(t - first_leaf + 1) * w];
                g[0] += coef;
                for (gj, xj) in g[1..].iter_mut().zip(x) {
                    *gj += coef * xj;
                }
            }
            // bottom-up subtree sums, deepest branch nodes first
            for &b in branches.iter().rev() {
                below[b] = below[2 * b] + below[2 * b + 1];
            }
            for &b in &branches {
                let pb = logistic(self.mu, split_argument(self.omega_block(b), x));
                let coef = self.mu * ((1.0 - pb) * below[2 * b] - pb * below[2 * b + 1]) / n;
                let g = &mut grad.omega[(b - 1) * w..b * w];
                g[0] += coef;
                for (gj, xj) in g[1..].iter_mut().zip(x) {
                    *gj += coef * xj * inv_p;
                }
            }
        };
        match scope.points {
            Some(points) => points.iter().for_each(|&i| point(i)),
            None => (0..data.len()).for_each(&mut point),
        }

        for &b in &branches {
            let s = (b - 1) * w;
            for j in 0..w {
                grad.omega[s + j] += reg.lambda_omega * self.omega[s + j];
            }
        }
        for t in leaves {
            let s = (t - first_leaf) * w;
            for j in 0..w {
                grad.beta[s + j] += reg.lambda_beta * self.beta[s + j];
            }
        }
        grad
    }

    /// Gradient blocks of the full regularized error for the requested nodes
    /// (branch nodes yield `dE/domega_t`, leaves `dE/dbeta_t`).
    pub fn grad_error(
        &self,
        data: &Dataset,
        reg: Regularization,
        nodes: &[usize],
    ) -> Result<Vec<NodeGrad>> {
        if data.is_empty() {
            return Err(SrtError::EmptyDataset);
        }
        self.check_dataset(data)?;
        let topo = self.topology();
        if let Some(&bad) = nodes.iter().find(|&&t| !topo.contains(t)) {
            return Err(SrtError::invalid(format!("node {bad} is not in the tree")));
        }
        let full = self.scoped_gradient(data, reg, Scope::FULL);
        Ok(nodes
            .iter()
            .map(|&t| NodeGrad {
                node: t,
                grad: if topo.is_branch(t) {
                    full.omega_block(t).to_vec()
                } else {
                    full.beta_block(t).to_vec()
                },
            })
            .collect())
    }
}
