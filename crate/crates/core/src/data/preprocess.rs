use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Result, SrtError};

/// Min-max feature scaling and target standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub target_mean: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub target_std: f64,
}

impl PreprocessParams {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(SrtError::EmptyDataset);
        }
        train.check_finite()?;
        let p = train.n_features();
        let mut feature_min = vec![f64::INFINITY; p];
        let mut feature_max = vec![f64::NEG_INFINITY; p];
        for row in train.rows() {
            for (j, &v) in row.iter().enumerate() {
                feature_min[j] = feature_min[j].min(v);
                feature_max[j] = feature_max[j].max(v);
            }
        }
        let n = train.len() as f64;
        let target_mean = train.targets.iter().sum::<f64>() / n;
        let ss: f64 = train.targets.iter().map(|y| (y - target_mean).powi(2)).sum();
        if train.len() < 2 || ss == 0.0 {
            return Err(SrtError::invalid("training targets have zero variance"));
        }
        Ok(Self {
            feature_min,
            feature_max,
            target_mean,
            target_std: (ss / (n - 1.0)).sqrt(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_min.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_min.len() != self.feature_max.len() {
            return Err(SrtError::invalid("feature min/max lengths differ"));
        }
        if self
            .feature_min
            .iter()
            .zip(&self.feature_max)
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi >= lo))
        {
            return Err(SrtError::invalid("feature ranges must be finite with max >= min"));
        }
        if !(self.target_std.is_finite() && self.target_std > 0.0 && self.target_mean.is_finite()) {
            return Err(SrtError::invalid("target std must be positive and finite"));
        }
        Ok(())
    }

    /// Scale one feature row in place. Constant training columns map to 0;
    /// values outside the training range are passed through unclamped.
    pub fn scale_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            let (lo, hi) = (self.feature_min[j], self.feature_max[j]);
            *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
        }
    }

    pub fn standardize_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn restore_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }

    /// Apply to a whole split, keeping labels and names.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.n_features() {
            return Err(SrtError::invalid(format!(
                "dataset has {} features, preprocessing expects {}",
                data.n_features(),
                self.n_features()
            )));
        }
        let mut features = data.features().to_vec();
        for row in features.chunks_exact_mut(data.n_features()) {
            self.scale_row(row);
        }
        let targets = data.targets.iter().map(|&y| self.standardize_target(y)).collect();
        let mut out = Dataset::new(data.n_features(), features, targets)?
            .with_feature_names(data.feature_names.clone())?;
        out.labels = data.labels.clone();
        Ok(out)
    }
}
