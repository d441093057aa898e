use crate::data::Dataset;
use crate::model::{ModelParams, Regularization, Scope};

use super::bn::WorkingSet;

/// Error function minimized by one phase of an inner iteration: either the
/// exact regularized error or its subtree proxy (the selected node treated as
/// the root, only the points whose HBP path contains it).
#[derive(Debug, Clone)]
pub struct Subproblem<'a> {
    data: &'a Dataset,
    reg: Regularization,
    root: usize,
    points: Option<Vec<usize>>,
}

impl<'a> Subproblem<'a> {
    pub fn exact(data: &'a Dataset, reg: Regularization) -> Self {
        Self { data, reg, root: 1, points: None }
    }

    pub fn proxy(model: &ModelParams, data: &'a Dataset, reg: Regularization, t: usize) -> Self {
        Self {
            data,
            reg,
            root: t,
            points: Some(model.points_through(data, t)),
        }
    }

    /// Proxy when `proxy` holds, exact otherwise.
    pub fn select(
        proxy: bool,
        model: &ModelParams,
        data: &'a Dataset,
        reg: Regularization,
        t: usize,
    ) -> Self {
        if proxy { Self::proxy(model, data, reg, t) } else { Self::exact(data, reg) }
    }

    pub fn is_exact(&self) -> bool {
        self.points.is_none()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn reg(&self) -> Regularization {
        self.reg
    }

    pub fn scope(&self) -> Scope<'_> {
        Scope { root: self.root, points: self.points.as_deref() }
    }

    pub fn value(&self, model: &ModelParams) -> f64 {
        model.scoped_error(self.data, self.reg, self.scope())
    }

    /// Gradient with respect to the omega blocks of `nodes`, concatenated.
    pub fn branch_grad(&self, model: &ModelParams, nodes: &[usize]) -> Vec<f64> {
        model.scoped_gradient(self.data, self.reg, self.scope()).gather_omega(nodes)
    }

    pub fn leaf_grad_norm(&self, model: &ModelParams, leaves: &[usize]) -> f64 {
        model.scoped_gradient(self.data, self.reg, self.scope()).beta_norm(leaves)
    }

    /// Value and gradient as functions of the omega blocks of `ws.branches`.
    pub(crate) fn branch_fn<'m>(
        &'m self,
        model: &'m ModelParams,
        ws: &'m WorkingSet,
    ) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) + 'm {
        let mut scratch = model.clone();
        move |flat| {
            scratch.scatter_omega(&ws.branches, flat);
            let g = self.branch_grad(&scratch, &ws.branches);
            (self.value(&scratch), g)
        }
    }
}
