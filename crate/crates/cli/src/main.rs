use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use srt_core::data::{self, load_csv, write_csv};
use srt_core::experiment::{
    crossval, fit_pipeline, synthetic_config, synthetic_runs, Method, RunReport, Start, Variant,
    VariantReport,
};
use srt_core::model::ModelDocument;
use srt_core::{Result, SrtError, TrainConfig};

#[derive(Parser)]
#[command(name = "srt", version, about = "Soft regression trees trained by node decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model on a CSV file and write it as JSON with its trace.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        opts: TrainOpts,
        /// Model JSON path; the trace and report are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the response of every row of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated k-fold cross-validation.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        opts: TrainOpts,
        #[command(flatten)]
        runs: RunOpts,
    },
    /// Routing benchmark on the four-cluster synthetic dataset.
    SynthBench {
        #[command(flatten)]
        opts: TrainOpts,
        #[command(flatten)]
        runs: RunOpts,
    },
    /// Cross-validated comparison of joint optimization, plain decomposition
    /// and decomposition with reassignment (synthetic data when --data is absent).
    Ablation {
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        opts: TrainOpts,
        #[command(flatten)]
        runs: RunOpts,
    },
    /// Write the synthetic dataset of a seed as CSV.
    GenSynthetic {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Clustering,
    Random,
}

#[derive(Args)]
struct TrainOpts {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable the reassignment heuristic.
    #[arg(long)]
    no_reassign: bool,
    /// Joint quasi-Newton optimization instead of decomposition.
    #[arg(long, conflicts_with = "no_reassign")]
    plain: bool,
    #[arg(long, value_enum, default_value_t = StartArg::Clustering)]
    start: StartArg,
}

#[derive(Args)]
struct RunOpts {
    #[arg(long, default_value_t = 4)]
    folds: usize,
    /// Number of starting points per fold (seeds seed, seed + 1, ...).
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Worker threads; all available cores when omitted.
    #[arg(long)]
    jobs: Option<usize>,
    /// Report JSON path; wall times go to a `.timings.json` sidecar.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl TrainOpts {
    fn config(&self) -> Result<TrainConfig> {
        let mut config = match &self.config {
            Some(path) => TrainConfig::parse(&read_text(path)?)?,
            None => TrainConfig::default(),
        };
        if let Some(d) = self.depth {
            config.depth = d;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.no_reassign |= self.no_reassign;
        config.validate()?;
        for w in config.warnings() {
            log::info!("{w}");
        }
        Ok(config)
    }

    fn variant(&self, config: &TrainConfig) -> Variant {
        let start = match self.start {
            StartArg::Clustering => Start::Clustering,
            StartArg::Random => Start::Random,
        };
        let method = if self.plain {
            Method::JointOptimization
        } else if config.no_reassign {
            Method::PlainDecomposition
        } else {
            Method::Decomposition
        };
        Variant { start, method }
    }
}

impl RunOpts {
    fn seed_list(&self, base: u64) -> Vec<u64> {
        (0..self.seeds).map(|s| base.wrapping_add(s)).collect()
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| SrtError::Io { path: path.display().to_string(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| SrtError::Io { path: path.display().to_string(), source })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn emit_report(report: &mut RunReport, out: Option<&Path>) -> Result<()> {
    if let Some(path) = out {
        let timings = sibling(path, ".timings.json");
        report.artifacts = vec![path.display().to_string(), timings.display().to_string()];
        write_text(path, &report.to_json()?)?;
        write_text(&timings, &report.timings_json()?)?;
    }
    print!("{}", report.table());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { data, opts, out } => {
            let config = opts.config()?;
            let raw = load_csv(&data)?;
            let fitted = fit_pipeline(&raw, &config, opts.variant(&config), config.seed)?;
            let doc = ModelDocument::new(&fitted.params, raw.feature_names.clone(), Some(fitted.preprocess.clone()));
            doc.save(&out)?;
            let trace = sibling(&out, ".trace.txt");
            write_text(&trace, &fitted.report.trace_text())?;
            let pred = fitted.params.predict_dataset(&fitted.train_data)?;
            let r2 = data::r_squared(&pred, &fitted.train_data.targets)?;
            println!("objective {:.10e}", fitted.report.best_error);
            println!("training R2 {r2:.6}");
            println!("model {}", out.display());
            println!("trace {}", trace.display());
        }
        Command::Predict { model, data, out } => {
            let doc = ModelDocument::load(&model)?;
            let params = doc.to_model()?;
            let raw = load_csv(&data)?;
            if raw.n_features() != params.n_features() {
                return Err(SrtError::InvalidInput(format!(
                    "{} has {} features, the model expects {}",
                    data.display(),
                    raw.n_features(),
                    params.n_features()
                )));
            }
            let predictions = match &doc.normalization {
                Some(norm) => {
                    let scaled = norm.apply(&raw)?;
                    params.predict_dataset(&scaled)?.into_iter().map(|v| norm.restore_target(v)).collect::<Vec<_>>()
                }
                None => params.predict_dataset(&raw)?,
            };
            let mut text = String::from("prediction\n");
            for v in &predictions {
                text.push_str(&format!("{v}\n"));
            }
            match out {
                Some(path) => write_text(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Crossval { data, opts, runs } => {
            let config = opts.config()?;
            let raw = load_csv(&data)?;
            let seeds = runs.seed_list(config.seed);
            let variant = opts.variant(&config);
            let records = crossval(&raw, &config, variant, runs.folds, &seeds, runs.jobs)?;
            let mut report = RunReport::new("crossval", &config, Some(runs.folds), seeds);
            report.variants.push(VariantReport::new(variant, records));
            emit_report(&mut report, runs.out.as_deref())?;
        }
        Command::SynthBench { opts, runs } => {
            let config = synthetic_config(&opts.config()?);
            let seeds = runs.seed_list(config.seed);
            let mut report = RunReport::new("synth-bench", &config, None, seeds.clone());
            for variant in Variant::LADDER {
                let records = synthetic_runs(&config, variant, &seeds, runs.jobs)?;
                report.variants.push(VariantReport::new(variant, records));
            }
            emit_report(&mut report, runs.out.as_deref())?;
        }
        Command::Ablation { data, opts, runs } => {
            let base = opts.config()?;
            let (raw, config) = match &data {
                Some(path) => (load_csv(path)?, base),
                None => (data::gen_synthetic(base.seed), synthetic_config(&base)),
            };
            let seeds = runs.seed_list(config.seed);
            let mut report = RunReport::new("ablation", &config, Some(runs.folds), seeds.clone());
            for variant in Variant::LADDER {
                let records = crossval(&raw, &config, variant, runs.folds, &seeds, runs.jobs)?;
                report.variants.push(VariantReport::new(variant, records));
            }
            emit_report(&mut report, runs.out.as_deref())?;
        }
        Command::GenSynthetic { seed, out } => {
            write_csv(&out, &data::gen_synthetic(seed))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
