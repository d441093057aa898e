use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SrtError};

const MAX_LLOYD_ITERS: usize = 100;

/// Outcome of a 2-means run. Indices refer to positions in the input slice.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans2 {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub centroids: [Vec<f64>; 2],
    /// Within-cluster sum of squares after every assignment step.
    pub wcss_trace: Vec<f64>,
    /// Set when all points coincide; `second` is then empty.
    pub degenerate: bool,
}

impl KMeans2 {
    pub fn wcss(&self) -> f64 {
        self.wcss_trace.last().copied().unwrap_or(0.0)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's algorithm with k = 2 and k-means++ seeding.
pub fn kmeans2(points: &[&[f64]], seed: u64) -> Result<KMeans2> {
    let n = points.len();
    if n < 2 {
        return Err(SrtError::invalid("2-means needs at least two points"));
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let c0 = points[rng.random_range(0..n)].to_vec();
    let d2: Vec<f64> = points.iter().map(|p| dist2(p, &c0)).collect();
    let total: f64 = d2.iter().sum();
    if !(total > 0.0) {
        return Ok(KMeans2 {
            first: (0..n).collect(),
            second: Vec::new(),
            centroids: [c0.clone(), c0],
            wcss_trace: vec![0.0],
            degenerate: true,
        });
    }
    let mut target = rng.random::<f64>() * total;
    let mut pick = n - 1;
    for (i, d) in d2.iter().enumerate() {
        if *d > 0.0 && target < *d {
            pick = i;
            break;
        }
        target -= d;
    }
    if d2[pick] == 0.0 {
        pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
    }
    let mut centroids = [c0, points[pick].to_vec()];

    let mut assign = vec![usize::MAX; n];
    let mut wcss_trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        let mut wcss = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (a, b) = (dist2(p, &centroids[0]), dist2(p, &centroids[1]));
            let c = usize::from(b < a);
            wcss += a.min(b);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        wcss_trace.push(wcss);
        if !changed {
            break;
        }
        let mut sums = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..2 {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let first = (0..n).filter(|&i| assign[i] == 0).collect();
    let second = (0..n).filter(|&i| assign[i] == 1).collect();
    Ok(KMeans2 { first, second, centroids, wcss_trace, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rows(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn separable_one_dimensional() {
        let pts = vec![vec![0.0], vec![0.01], vec![10.0], vec![10.01]];
        let res = kmeans2(&rows(&pts), 3).unwrap();
        let mut groups = [res.first.clone(), res.second.clone()];
        groups.sort();
        assert_eq!(groups, [vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = vec![vec![1.0, 2.0]; 5];
        let res = kmeans2(&rows(&pts), 0).unwrap();
        assert!(res.degenerate && res.second.is_empty() && res.first.len() == 5);
    }

    fn best_partition_wcss(pts: &[Vec<f64>]) -> f64 {
        let n = pts.len();
        let cost = |idx: &[usize]| {
            if idx.is_empty() {
                return 0.0;
            }
            let d = pts[0].len();
            let mean: Vec<f64> = (0..d)
                .map(|k| idx.iter().map(|&i| pts[i][k]).sum::<f64>() / idx.len() as f64)
                .collect();
            idx.iter().map(|&i| dist2(&pts[i], &mean)).sum::<f64>()
        };
        (1u32..(1 << n) - 1)
            .map(|mask| {
                let a: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                let b: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
                cost(&a) + cost(&b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_exhaustive_partition_on_six_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hits = 0;
        let trials = 200;
        for t in 0..trials {
            let pts: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let best = best_partition_wcss(&pts);
            let res = kmeans2(&rows(&pts), t).unwrap();
            assert!(res.wcss() >= best - 1e-12);
            // Lloyd fixed point: every point sits with its nearer centroid
            for (c, members) in [&res.first, &res.second].into_iter().enumerate() {
                for &i in members {
                    let own = dist2(&pts[i], &res.centroids[c]);
                    let other = dist2(&pts[i], &res.centroids[1 - c]);
                    assert!(own <= other + 1e-12, "trial {t}");
                }
            }
            if (res.wcss() - best).abs() < 1e-12 {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.45 * trials as f64, "single-run hits {hits}");
    }

    proptest! {
        #[test]
        fn wcss_non_increasing_and_deterministic(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..60),
            seed in any::<u64>(),
        ) {
            let res = kmeans2(&rows(&pts), seed).unwrap();
            for w in res.wcss_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0]));
            }
            prop_assert_eq!(res.first.len() + res.second.len(), pts.len());
            prop_assert_eq!(&kmeans2(&rows(&pts), seed).unwrap(), &res);
        }
    }
}
