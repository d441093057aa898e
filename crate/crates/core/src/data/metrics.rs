use crate::error::{Result, SrtError};

/// Coefficient of determination `1 - SS_res / SS_tot`; negative when the
/// predictions are worse than the mean of the targets.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(SrtError::invalid("prediction and target lengths differ"));
    }
    if targets.len() < 2 {
        return Err(SrtError::invalid("R^2 needs at least two targets"));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(SrtError::invalid("targets have zero variance"));
    }
    let ss_res: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
