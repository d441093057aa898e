use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;

pub const SYNTHETIC_CENTERS: [[f64; 3]; 4] = [
    [0.2, 0.2, 0.2],
    [0.8, 0.2, 0.8],
    [0.2, 0.8, 0.8],
    [0.8, 0.8, 0.2],
];

/// Per-cluster linear response coefficients.
pub const SYNTHETIC_COEFFICIENTS: [[f64; 3]; 4] = [
    [-1.51, 0.46, -3.81],
    [2.32, -1.41, -0.11],
    [-1.56, 1.12, 1.53],
    [-2.32, 1.41, 0.11],
];

pub const SYNTHETIC_CLUSTER_SIZE: usize = 375;
pub const SYNTHETIC_SPREAD: f64 = 0.06;
pub const SYNTHETIC_NOISE_STD: f64 = 0.1;

/// Four Gaussian clusters of 375 points in three features with a cluster-specific
/// linear response plus white noise. Rows are grouped by cluster; labels are 0..4.
pub fn gen_synthetic(seed: u64) -> Dataset {
    gen_synthetic_with_noise(seed, SYNTHETIC_NOISE_STD)
}

/// As [`gen_synthetic`] with a custom response noise level. The feature draws do
/// not depend on `noise_std`, so the same seed gives the same inputs.
pub fn gen_synthetic_with_noise(seed: u64, noise_std: f64) -> Dataset {
    let mut x_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let spread = Normal::new(0.0, SYNTHETIC_SPREAD).expect("positive spread");
    let noise = Normal::new(0.0, noise_std.abs()).expect("finite noise");
    let n = 4 * SYNTHETIC_CLUSTER_SIZE;
    let mut features = Vec::with_capacity(3 * n);
    let mut targets = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (c, (center, coef)) in SYNTHETIC_CENTERS.iter().zip(&SYNTHETIC_COEFFICIENTS).enumerate() {
        for _ in 0..SYNTHETIC_CLUSTER_SIZE {
            let x: Vec<f64> = center.iter().map(|m| m + spread.sample(&mut x_rng)).collect();
            let y: f64 = coef.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>()
                + noise.sample(&mut y_rng);
            features.extend_from_slice(&x);
            targets.push(y);
            labels.push(c);
        }
    }
    Dataset::new(3, features, targets)
        .and_then(|d| d.with_labels(labels))
        .expect("generator shapes are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn sizes_and_labels() {
        let ds = gen_synthetic(3);
        assert_eq!((ds.len(), ds.n_features()), (1500, 3));
        let labels = ds.labels.as_ref().unwrap();
        for c in 0..4 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 375);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(gen_synthetic(11), gen_synthetic(11));
        assert_ne!(gen_synthetic(11).targets, gen_synthetic(12).targets);
    }

    #[test]
    fn noiseless_cluster_ols_recovers_coefficients() {
        let ds = gen_synthetic_with_noise(5, 0.0);
        let labels = ds.labels.clone().unwrap();
        for (c, coef) in SYNTHETIC_COEFFICIENTS.iter().enumerate() {
            let idx: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == c).collect();
            let x = DMatrix::from_fn(idx.len(), 4, |r, k| {
                if k == 0 { 1.0 } else { ds.row(idx[r])[k - 1] }
            });
            let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| ds.targets[i]));
            let sol = x.svd(true, true).solve(&y, 1e-14).unwrap();
            assert!(sol[0].abs() < 1e-6);
            for j in 0..3 {
                assert!((sol[j + 1] - coef[j]).abs() < 1e-6, "cluster {c} coef {j}");
            }
        }
    }
}
