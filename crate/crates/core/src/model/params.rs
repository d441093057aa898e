use serde::{Deserialize, Serialize};

use super::TreeTopology;
use crate::error::{Result, SrtError};

/// Branch-node split vectors `omega_t` and leaf regression vectors `beta_t`.
///
/// Both are stored node-major: the `(p + 1)`-vector of branch node `t` occupies
/// `omega[(t - 1) * (p + 1)..t * (p + 1)]` with the intercept first, and leaves
/// are laid out the same way in `beta` starting from the leftmost leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    topology: TreeTopology,
    n_features: usize,
    pub mu: f64,
    pub omega: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters. Every split sits exactly on its tie, so HBP routing
    /// sends every point to the leftmost leaf.
    pub fn zeros(depth: usize, n_features: usize, mu: f64) -> Result<Self> {
        let topology = TreeTopology::new(depth)?;
        if n_features == 0 {
            return Err(SrtError::invalid("model needs at least one feature"));
        }
        check_mu(mu)?;
        let width = n_features + 1;
        Ok(Self {
            topology,
            n_features,
            mu,
            omega: vec![0.0; width * topology.n_branch()],
            beta: vec![0.0; width * topology.n_leaf()],
        })
    }

    /// Build from node-major vectors, validating shapes and finiteness.
    pub fn from_parts(
        depth: usize,
        n_features: usize,
        mu: f64,
        omega: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let mut model = Self::zeros(depth, n_features, mu)?;
        if omega.len() != model.omega.len() || beta.len() != model.beta.len() {
            return Err(SrtError::invalid(format!(
                "parameter shape mismatch: omega {} (expected {}), beta {} (expected {})",
                omega.len(),
                model.omega.len(),
                beta.len(),
                model.beta.len()
            )));
        }
        model.omega = omega;
        model.beta = beta;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        let width = self.width();
        if self.omega.len() != width * self.topology.n_branch()
            || self.beta.len() != width * self.topology.n_leaf()
        {
            return Err(SrtError::invalid("parameter shape does not match topology"));
        }
        if self.omega.iter().chain(&self.beta).any(|v| !v.is_finite()) {
            return Err(SrtError::invalid("model parameters must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.topology.depth()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// `p + 1`, the length of every node vector.
    #[inline]
    pub fn width(&self) -> usize {
        self.n_features + 1
    }

    pub fn omega_block(&self, t: usize) -> &[f64] {
        let w = self.width();
        let s = self.topology.branch_slot(t);
        &self.omega[s * w..(s + 1) * w]
    }

    pub fn omega_block_mut(&mut self, t: usize) -> &mut [f64] {
        let w = self.width();
        let s = self.topology.branch_slot(t);
        &mut self.omega[s * w..(s + 1) * w]
    }

    pub fn beta_block(&self, t: usize) -> &[f64] {
        let w = self.width();
        let s = self.topology.leaf_slot(t);
        &self.beta[s * w..(s + 1) * w]
    }

    pub fn beta_block_mut(&mut self, t: usize) -> &mut [f64] {
        let w = self.width();
        let s = self.topology.leaf_slot(t);
        &mut self.beta[s * w..(s + 1) * w]
    }

    /// Concatenate the omega vectors of `nodes` into one flat vector.
    pub fn gather_omega(&self, nodes: &[usize]) -> Vec<f64> {
        nodes
            .iter()
            .flat_map(|&t| self.omega_block(t).iter().copied())
            .collect()
    }

    /// Inverse of [`gather_omega`](Self::gather_omega).
    pub fn scatter_omega(&mut self, nodes: &[usize], flat: &[f64]) {
        let w = self.width();
        debug_assert_eq!(flat.len(), nodes.len() * w);
        for (chunk, &t) in flat.chunks_exact(w).zip(nodes) {
            self.omega_block_mut(t).copy_from_slice(chunk);
        }
    }

    pub fn omega_norm_sq(&self) -> f64 {
        self.omega.iter().map(|v| v * v).sum()
    }

    pub fn beta_norm_sq(&self) -> f64 {
        self.beta.iter().map(|v| v * v).sum()
    }

    /// True when every leaf regression is a constant (`beta_jt = 0` for `j >= 1`).
    pub fn has_constant_leaves(&self) -> bool {
        self.beta
            .chunks_exact(self.width())
            .all(|b| b[1..].iter().all(|&v| v == 0.0))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(SrtError::invalid(format!(
            "logistic sharpness mu must be positive and finite, got {mu}"
        )));
    }
    Ok(())
}
