//! Training pipelines, cross-validation and the synthetic routing benchmark.
//!
//! A pipeline fits [`PreprocessParams`] on its training rows, builds a starting
//! point, trains, and scores. Independent runs are spread over a worker pool;
//! results are collected in a fixed order so reports do not depend on the
//! schedule.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, PreprocessParams};
use crate::error::{Result, SrtError};
use crate::init;
use crate::model::ModelParams;
use crate::optimizer::{plain_train, train, FitReport, TrainConfig};

/// Starting point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// Recursive 2-means partition scored by Davies-Bouldin, then warm-start fits.
    Clustering,
    /// Uniform random branch vectors and small random leaf vectors.
    Random,
}

/// Optimizer applied after the start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Node decomposition with the reassignment heuristic.
    Decomposition,
    /// Node decomposition with the imbalance gate forced off.
    PlainDecomposition,
    /// Quasi-Newton over all parameters at once.
    JointOptimization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub start: Start,
    pub method: Method,
}

impl Variant {
    pub const FULL: Variant = Variant { start: Start::Clustering, method: Method::Decomposition };
    pub const REASSIGN_ONLY: Variant = Variant { start: Start::Random, method: Method::Decomposition };
    pub const HEURISTIC_OFF: Variant = Variant { start: Start::Random, method: Method::PlainDecomposition };
    pub const PLAIN: Variant = Variant { start: Start::Random, method: Method::JointOptimization };

    /// Ladder from the joint baseline to the full pipeline.
    pub const LADDER: [Variant; 4] =
        [Variant::PLAIN, Variant::HEURISTIC_OFF, Variant::REASSIGN_ONLY, Variant::FULL];

    pub fn name(&self) -> String {
        let start = match self.start {
            Start::Clustering => "clustering",
            Start::Random => "random",
        };
        let method = match self.method {
            Method::Decomposition => "decomposition+reassignment",
            Method::PlainDecomposition => "plain-decomposition",
            Method::JointOptimization => "plain-optimization",
        };
        format!("{method}/{start}")
    }
}

/// A trained model with the normalization it expects.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub params: ModelParams,
    pub preprocess: PreprocessParams,
    pub report: FitReport,
    /// Training set after normalization.
    pub train_data: Dataset,
}

impl FittedModel {
    /// Predictions in original target units for raw (unnormalized) rows.
    pub fn predict_raw(&self, raw: &Dataset) -> Result<Vec<f64>> {
        let scaled = self.preprocess.apply(raw)?;
        let out = self.params.predict_dataset(&scaled)?;
        Ok(out.into_iter().map(|v| self.preprocess.restore_target(v)).collect())
    }
}

fn start_point(data: &Dataset, config: &TrainConfig, start: Start, seed: u64) -> Result<ModelParams> {
    match start {
        Start::Clustering => Ok(init::initialize(data, config, config.init_repeats, seed)?.params),
        Start::Random => init::random_init(config.depth, data.n_features(), config.mu, seed),
    }
}

/// Normalize `raw`, build the start, train.
pub fn fit_pipeline(raw: &Dataset, config: &TrainConfig, variant: Variant, seed: u64) -> Result<FittedModel> {
    let preprocess = PreprocessParams::fit(raw)?;
    let train_data = preprocess.apply(raw)?;
    let mut config = config.clone();
    config.seed = seed;
    let start = start_point(&train_data, &config, variant.start, seed)?;
    let report = match variant.method {
        Method::Decomposition => train(&train_data, &start, &config)?,
        Method::PlainDecomposition => {
            config.no_reassign = true;
            train(&train_data, &start, &config)?
        }
        Method::JointOptimization => plain_train(&train_data, &start, &config)?,
    };
    Ok(FittedModel { params: report.best_params.clone(), preprocess, report, train_data })
}

/// One train/evaluate cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// Fold held out for testing; `None` when the run trains on every row.
    pub fold: Option<usize>,
    /// Testing R² for cross-validation runs, training R² otherwise.
    pub r2: f64,
    pub train_r2: f64,
    pub best_error: f64,
    pub iterations: usize,
    /// Gini routing impurity on the training rows, when labels are known.
    pub gini: Option<f64>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub name: String,
    pub runs: Vec<RunRecord>,
    pub mean_r2: f64,
    pub std_r2: f64,
    pub negative_r2: usize,
    pub median_gini: Option<f64>,
}

impl VariantReport {
    pub fn new(variant: Variant, runs: Vec<RunRecord>) -> Self {
        let r2: Vec<f64> = runs.iter().map(|r| r.r2).collect();
        let (mean_r2, std_r2) = data::mean_and_std(&r2);
        let negative_r2 = r2.iter().filter(|&&v| v < 0.0).count();
        let ginis: Option<Vec<f64>> = runs.iter().map(|r| r.gini).collect();
        let median_gini = ginis.filter(|g| !g.is_empty()).map(|g| median(&g));
        Self { variant, name: variant.name(), runs, mean_r2, std_r2, negative_r2, median_gini }
    }

    pub fn ginis(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.gini).collect()
    }
}

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Machine-readable summary of a command. Wall times are kept out of the
/// serialized form so that reruns produce identical bytes; see
/// [`RunReport::timings_json`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// `key = value` echo of the training configuration.
    pub config: String,
    pub folds: Option<usize>,
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantReport>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: &TrainConfig, folds: Option<usize>, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            config: config.to_kv_string(),
            folds,
            seeds,
            variants: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-run wall times, grouped by variant.
    pub fn timings_json(&self) -> Result<String> {
        let value: Vec<serde_json::Value> = self
            .variants
            .iter()
            .map(|v| {
                serde_json::json!({
                    "variant": v.name,
                    "seconds": v.runs.iter().map(|r| r.seconds).collect::<Vec<_>>(),
                    "mean_seconds": v.runs.iter().map(|r| r.seconds).sum::<f64>() / v.runs.len().max(1) as f64,
                })
            })
            .collect();
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<44} {:>6} {:>9} {:>9} {:>6} {:>8} {:>9}", "variant", "runs", "mean R2", "std R2", "R2<0", "gini", "seconds");
        for v in &self.variants {
            let secs = v.runs.iter().map(|r| r.seconds).sum::<f64>() / v.runs.len().max(1) as f64;
            let gini = v.median_gini.map_or("-".to_string(), |g| format!("{g:.3}"));
            let _ = writeln!(
                out,
                "{:<44} {:>6} {:>9.4} {:>9.4} {:>6} {:>8} {:>9.3}",
                v.name,
                v.runs.len(),
                v.mean_r2,
                v.std_r2,
                v.negative_r2,
                gini,
                secs
            );
        }
        out
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| SrtError::invalid(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

fn score(fitted: &FittedModel, seed: u64, fold: Option<usize>, test: Option<&Dataset>, seconds: f64) -> Result<RunRecord> {
    let train_pred = fitted.params.predict_dataset(&fitted.train_data)?;
    let train_r2 = data::r_squared(&train_pred, &fitted.train_data.targets)?;
    let r2 = match test {
        Some(raw) => data::r_squared(&fitted.predict_raw(raw)?, &raw.targets)?,
        None => train_r2,
    };
    let gini = match fitted.train_data.labels {
        Some(_) => Some(data::gini_routing(&fitted.params, &fitted.train_data)?),
        None => None,
    };
    Ok(RunRecord {
        seed,
        fold,
        r2,
        train_r2,
        best_error: fitted.report.best_error,
        iterations: fitted.report.iterations_run,
        gini,
        seconds,
    })
}

/// `folds`-fold cross-validation repeated over `seeds`. The fold plan is drawn
/// once from `config.seed`; each seed changes the starting point. Records are
/// ordered by seed, then fold.
pub fn crossval(
    raw: &Dataset,
    config: &TrainConfig,
    variant: Variant,
    folds: usize,
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let plan = data::kfold(raw.len(), folds, config.seed)?;
    let tasks: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| (0..folds).map(move |f| (s, f))).collect();
    with_pool(jobs, || {
        tasks
            .par_iter()
            .map(|&(seed, fold)| {
                let started = Instant::now();
                let train_rows = raw.subset(&plan.train_indices(fold));
                let test_rows = raw.subset(plan.test_indices(fold));
                let fitted = fit_pipeline(&train_rows, config, variant, seed)?;
                score(&fitted, seed, Some(fold), Some(&test_rows), started.elapsed().as_secs_f64())
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Train `variant` on the synthetic dataset of every seed and record training
/// R² and Gini routing impurity.
pub fn synthetic_runs(config: &TrainConfig, variant: Variant, seeds: &[u64], jobs: Option<usize>) -> Result<Vec<RunRecord>> {
    config.validate()?;
    with_pool(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let started = Instant::now();
                let raw = data::gen_synthetic(seed);
                let fitted = fit_pipeline(&raw, config, variant, seed)?;
                score(&fitted, seed, None, None, started.elapsed().as_secs_f64())
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Configuration used by the synthetic benchmark: the given one with both
/// regularizers set to zero unless the caller fixed them explicitly.
pub fn synthetic_config(base: &TrainConfig) -> TrainConfig {
    TrainConfig {
        lambda_omega: Some(base.lambda_omega.unwrap_or(0.0)),
        lambda_beta: Some(base.lambda_beta.unwrap_or(0.0)),
        depth: 2,
        ..base.clone()
    }
}
