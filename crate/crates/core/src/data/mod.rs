//! Dataset ingestion and preprocessing, cross-validation folds, metrics, the
//! four-cluster synthetic generator and the Gini routing diagnostic.

mod csv_io;
mod folds;
mod gini;
mod metrics;
mod preprocess;
mod synthetic;

pub use csv_io::{load_csv, write_csv, CLUSTER_LABEL_COLUMN};
pub use folds::{kfold, FoldPlan};
pub use gini::gini_routing;
pub use metrics::{mean_and_std, r_squared};
pub use preprocess::PreprocessParams;
pub use synthetic::{
    gen_synthetic, gen_synthetic_with_noise, SYNTHETIC_CENTERS, SYNTHETIC_COEFFICIENTS,
    SYNTHETIC_CLUSTER_SIZE, SYNTHETIC_NOISE_STD, SYNTHETIC_SPREAD,
};

use crate::error::{Result, SrtError};

/// Feature matrix (row-major), response vector and optional true cluster ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    features: Vec<f64>,
    pub targets: Vec<f64>,
    pub labels: Option<Vec<usize>>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(n_features: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if n_features == 0 {
            return Err(SrtError::invalid("dataset needs at least one feature"));
        }
        if features.len() != n_features * targets.len() {
            return Err(SrtError::invalid(format!(
                "feature buffer of length {} does not hold {} rows of {} features",
                features.len(),
                targets.len(),
                n_features
            )));
        }
        let feature_names = (1..=n_features).map(|j| format!("x{j}")).collect();
        Ok(Self {
            n_features,
            features,
            targets,
            labels: None,
            feature_names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(SrtError::invalid("ragged feature rows"));
        }
        Self::new(p, rows.concat(), targets)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(SrtError::invalid("label vector length differs from row count"));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(SrtError::invalid("feature name count differs from feature count"));
        }
        self.feature_names = names;
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Rows `indices` in the given order, carrying labels and names along.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            n_features: self.n_features,
            features,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
        }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.features.iter().chain(&self.targets).any(|v| !v.is_finite()) {
            return Err(SrtError::invalid("dataset contains non-finite values"));
        }
        Ok(())
    }
}
