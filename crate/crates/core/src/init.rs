//! Clustering-based starting point: recursive 2-means down the tree, selection
//! of the best of several partitions by Davies-Bouldin index, then a logistic
//! fit per branch node and a least-squares fit per leaf.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, SrtError};
use crate::model::{ModelParams, TreeTopology};
use crate::numerics::{fit_logistic, kmeans2, solve_wls, LogisticProblem, WlsProblem};
use crate::optimizer::TrainConfig;

const WARM_START_RIDGE: f64 = 1e-8;

/// Point sets `C_t` of every node, indexed by heap number (index 0 unused).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchicalAssignment {
    pub depth: usize,
    pub sets: Vec<Vec<usize>>,
    /// Branch nodes whose split could not separate their points.
    pub degenerate: Vec<usize>,
}

impl HierarchicalAssignment {
    pub fn set(&self, t: usize) -> &[usize] {
        &self.sets[t]
    }

    pub fn leaf_sets(&self) -> Vec<&[usize]> {
        let topo = TreeTopology::new(self.depth).expect("valid depth");
        topo.leaf_nodes().map(|t| self.sets[t].as_slice()).collect()
    }

    /// Leaf of every point.
    pub fn leaf_of_points(&self, n: usize) -> Vec<usize> {
        let topo = TreeTopology::new(self.depth).expect("valid depth");
        let mut out = vec![0; n];
        for t in topo.leaf_nodes() {
            for &i in &self.sets[t] {
                out[i] = t;
            }
        }
        out
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Split every branch node's points in two by 2-means, root first.
pub fn recursive_partition(data: &Dataset, depth: usize, seed: u64) -> Result<HierarchicalAssignment> {
    let topo = TreeTopology::new(depth)?;
    if data.len() < topo.n_leaf() {
        return Err(SrtError::invalid(format!(
            "{} points cannot fill the {} leaves of a depth-{depth} tree",
            data.len(),
            topo.n_leaf()
        )));
    }
    let mut sets = vec![Vec::new(); 2 * topo.n_leaf()];
    sets[1] = (0..data.len()).collect();
    let mut degenerate = Vec::new();
    for t in topo.branch_nodes() {
        let members = std::mem::take(&mut sets[t]);
        let (left, right) = if members.len() < 2 {
            degenerate.push(t);
            (members.clone(), Vec::new())
        } else {
            let rows: Vec<&[f64]> = members.iter().map(|&i| data.row(i)).collect();
            let km = kmeans2(&rows, mix_seed(seed, t as u64))?;
            if km.degenerate {
                degenerate.push(t);
            }
            (
                km.first.iter().map(|&j| members[j]).collect(),
                km.second.iter().map(|&j| members[j]).collect(),
            )
        };
        sets[2 * t] = left;
        sets[2 * t + 1] = right;
        sets[t] = members;
    }
    Ok(HierarchicalAssignment { depth, sets, degenerate })
}

/// `(1/K) sum_i max_{j != i} (s_i + s_j) / d_ij` over the non-empty clusters,
/// with `s` the mean distance to the centroid and `d` the centroid distance.
pub fn davies_bouldin(clusters: &[&[usize]], data: &Dataset) -> Result<f64> {
    let p = data.n_features();
    let stats: Vec<(Vec<f64>, f64)> = clusters
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let mut centroid = vec![0.0; p];
            for &i in c.iter() {
                for (m, v) in centroid.iter_mut().zip(data.row(i)) {
                    *m += v;
                }
            }
            centroid.iter_mut().for_each(|m| *m /= c.len() as f64);
            let scatter = c
                .iter()
                .map(|&i| dist(data.row(i), &centroid))
                .sum::<f64>()
                / c.len() as f64;
            (centroid, scatter)
        })
        .collect();
    if stats.len() < 2 {
        return Err(SrtError::invalid("Davies-Bouldin index needs two non-empty clusters"));
    }
    let k = stats.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            let d = dist(&stats[i].0, &stats[j].0);
            let s = stats[i].1 + stats[j].1;
            let ratio = if d > 0.0 {
                s / d
            } else if s > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Initialization {
    pub params: ModelParams,
    pub assignment: HierarchicalAssignment,
    pub db: f64,
    /// Score of every repetition, in repetition order.
    pub db_scores: Vec<f64>,
    pub chosen: usize,
}

/// Best of `repeats` recursive partitions by Davies-Bouldin index, turned into
/// model parameters by per-node logistic and per-leaf least-squares fits.
pub fn initialize(data: &Dataset, config: &TrainConfig, repeats: usize, seed: u64) -> Result<Initialization> {
    if repeats == 0 {
        return Err(SrtError::invalid("initialization needs at least one repetition"));
    }
    data.check_finite()?;
    let runs: Vec<(HierarchicalAssignment, f64)> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let a = recursive_partition(data, config.depth, mix_seed(seed, 0x1000 + r as u64))?;
            let db = davies_bouldin(&a.leaf_sets(), data).unwrap_or(f64::INFINITY);
            Ok((a, db))
        })
        .collect::<Result<_>>()?;
    let db_scores: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let chosen = db_scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one repetition");
    let (assignment, db) = runs.into_iter().nth(chosen).expect("chosen index exists");
    let params = fit_warm_start(data, &assignment, config.mu, WARM_START_RIDGE)?;
    Ok(Initialization { params, assignment, db, db_scores, chosen })
}

/// Parameters reproducing `assignment`: ridge-penalized logistic regression
/// (left child labelled 1) on the scaled inputs `(1, x/p)` of each branch node,
/// ordinary least squares on each leaf's points.
pub fn fit_warm_start(
    data: &Dataset,
    assignment: &HierarchicalAssignment,
    mu: f64,
    ridge: f64,
) -> Result<ModelParams> {
    let p = data.n_features();
    let mut model = ModelParams::zeros(assignment.depth, p, mu)?;
    let topo = *model.topology();
    let w = model.width();
    let inv_p = 1.0 / p as f64;

    for t in topo.branch_nodes() {
        let (left, right) = (&assignment.sets[2 * t], &assignment.sets[2 * t + 1]);
        let block = match (left.is_empty(), right.is_empty()) {
            (true, true) => vec![0.0; w],
            (false, true) => unit_intercept(w, 1.0),
            (true, false) => unit_intercept(w, -1.0),
            (false, false) => {
                let mut rows = Vec::with_capacity((left.len() + right.len()) * w);
                let mut labels = Vec::with_capacity(left.len() + right.len());
                for (set, label) in [(left, 1.0), (right, 0.0)] {
                    for &i in set.iter() {
                        rows.push(1.0);
                        rows.extend(data.row(i).iter().map(|v| v * inv_p));
                        labels.push(label);
                    }
                }
                let weights = vec![1.0; labels.len()];
                let problem = LogisticProblem {
                    rows: &rows,
                    width: w,
                    labels: &labels,
                    weights: &weights,
                    mu,
                    ridge,
                };
                fit_logistic(&problem, None)?.coef
            }
        };
        model.omega_block_mut(t).copy_from_slice(&block);
    }

    for t in topo.leaf_nodes() {
        let members = &assignment.sets[t];
        let block = if members.len() >= 2 {
            ols(data, members)?
        } else {
            let mut b = vec![0.0; w];
            b[0] = ancestor_mean(data, assignment, t);
            b
        };
        model.beta_block_mut(t).copy_from_slice(&block);
    }
    Ok(model)
}

fn unit_intercept(width: usize, sign: f64) -> Vec<f64> {
    let mut b = vec![0.0; width];
    b[0] = sign;
    b
}

fn ancestor_mean(data: &Dataset, assignment: &HierarchicalAssignment, leaf: usize) -> f64 {
    let mut t = leaf / 2;
    while t >= 1 {
        let set = &assignment.sets[t];
        if !set.is_empty() {
            return set.iter().map(|&i| data.targets[i]).sum::<f64>() / set.len() as f64;
        }
        t /= 2;
    }
    0.0
}

fn ols(data: &Dataset, members: &[usize]) -> Result<Vec<f64>> {
    let w = data.n_features() + 1;
    let mut design = Vec::with_capacity(members.len() * w);
    for &i in members {
        design.push(1.0);
        design.extend_from_slice(data.row(i));
    }
    let targets: Vec<f64> = members.iter().map(|&i| data.targets[i]).collect();
    let weights = vec![1.0; members.len()];
    let mut problem = WlsProblem { design: &design, width: w, targets: &targets, weights: &weights, ridge: 0.0 };
    match solve_wls(&problem) {
        Err(SrtError::SingularSystem(_)) => {
            problem.ridge = WARM_START_RIDGE;
            solve_wls(&problem)
        }
        other => other,
    }
}

/// Uniform random splits in `[-1, 1]` and small random leaf regressions.
pub fn random_init(depth: usize, n_features: usize, mu: f64, seed: u64) -> Result<ModelParams> {
    let mut model = ModelParams::zeros(depth, n_features, mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in model.omega.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    for v in model.beta.iter_mut() {
        *v = rng.random_range(-0.1..0.1);
    }
    Ok(model)
}
