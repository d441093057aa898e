use std::collections::BTreeMap;

use super::Dataset;
use crate::error::{Result, SrtError};
use crate::model::ModelParams;

/// Size-weighted mean over leaves of the Gini impurity `1 - sum_c f_c^2` of true
/// cluster labels among the points HBP-routed to each leaf. Zero iff every
/// non-empty leaf is label-pure.
pub fn gini_routing(model: &ModelParams, data: &Dataset) -> Result<f64> {
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| SrtError::invalid("Gini routing needs true cluster labels"))?;
    model.check_dataset(data)?;
    Ok(gini_of_assignment(&model.route_dataset(data), labels))
}

pub(crate) fn gini_of_assignment(leaves: &[usize], labels: &[usize]) -> f64 {
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&leaf, &label) in leaves.iter().zip(labels) {
        *counts.entry(leaf).or_default().entry(label).or_default() += 1;
    }
    let n = leaves.len() as f64;
    counts
        .values()
        .map(|by_label| {
            let size: usize = by_label.values().sum();
            let s = size as f64;
            let purity: f64 = by_label.values().map(|&c| (c as f64 / s).powi(2)).sum();
            s / n * (1.0 - purity)
        })
        .sum()
}
