use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::data::PreprocessParams;
use crate::error::{Result, SrtError};

/// On-disk model: node vectors listed by heap index (`omega[k]` belongs to
/// branch node `k + 1`, `beta[k]` to the `k`-th leaf from the left).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub depth: usize,
    pub mu: f64,
    pub p: usize,
    pub omega: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub normalization: Option<PreprocessParams>,
}

impl ModelDocument {
    pub fn new(
        model: &ModelParams,
        feature_names: Vec<String>,
        normalization: Option<PreprocessParams>,
    ) -> Self {
        let w = model.width();
        Self {
            depth: model.depth(),
            mu: model.mu,
            p: model.n_features(),
            omega: model.omega.chunks_exact(w).map(<[f64]>::to_vec).collect(),
            beta: model.beta.chunks_exact(w).map(<[f64]>::to_vec).collect(),
            feature_names,
            normalization,
        }
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        let w = self.p + 1;
        if self.omega.iter().chain(&self.beta).any(|c| c.len() != w) {
            return Err(SrtError::invalid(format!(
                "every node vector must have p + 1 = {w} entries"
            )));
        }
        if let Some(norm) = &self.normalization {
            if norm.feature_min.len() != self.p || norm.feature_max.len() != self.p {
                return Err(SrtError::invalid("normalization length differs from p"));
            }
        }
        ModelParams::from_parts(
            self.depth,
            self.p,
            self.mu,
            self.omega.concat(),
            self.beta.concat(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| SrtError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SrtError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
