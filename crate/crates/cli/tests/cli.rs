use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srt_core::experiment::RunReport;
use srt_core::TrainConfig;
use tempfile::TempDir;

fn srt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srt")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("fast.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn synthetic_csv(dir: &Path) -> PathBuf {
    let path = dir.join("synthetic.csv");
    let out = srt(&["gen-synthetic", "--seed", "3", "--out", path_str(&path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

/// `y = 1 + 2 x1 - x2` on a 60-point grid.
fn linear_csv(dir: &Path, name: &str, extra_feature: bool) -> PathBuf {
    let mut text = String::from(if extra_feature { "x1,x2,x3,y\n" } else { "x1,x2,y\n" });
    for i in 0..60 {
        let x1 = (i % 10) as f64 / 3.0;
        let x2 = (i / 10) as f64 * 0.7 - (i % 3) as f64;
        let y = 1.0 + 2.0 * x1 - x2;
        if extra_feature {
            text.push_str(&format!("{x1},{x2},0.5,{y}\n"));
        } else {
            text.push_str(&format!("{x1},{x2},{y}\n"));
        }
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn train_writes_model_and_trace() {
    let dir = TempDir::new().unwrap();
    let data = synthetic_csv(dir.path());
    let cfg = write_config(dir.path(), "k0 = -1\nmax_macro_iters = 4\ninit_repeats = 3\n");
    let model = dir.path().join("model.json");
    let out = srt(&["train", "--data", path_str(&data), "--config", path_str(&cfg), "--out", path_str(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("training R2"));

    let trace = fs::read_to_string(dir.path().join("model.trace.txt")).unwrap();
    let errors: Vec<f64> = trace
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split_whitespace().skip(4).map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert!(!errors.is_empty());
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "trace rises with enforcement from the start");
}

#[test]
fn missing_input_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = srt(&["train", "--data", path_str(&missing), "--out", path_str(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn zero_depth_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = linear_csv(dir.path(), "lin.csv", false);
    let out = srt(&["train", "--data", path_str(&data), "--depth", "0", "--out", path_str(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn predict_reproduces_linear_target() {
    let dir = TempDir::new().unwrap();
    let data = linear_csv(dir.path(), "lin.csv", false);
    let cfg = write_config(dir.path(), "lambda_omega = 0\nlambda_beta = 0\nmax_macro_iters = 3\ninit_repeats = 2\n");
    let model = dir.path().join("lin.json");
    let out = srt(&["train", "--data", path_str(&data), "--config", path_str(&cfg), "--out", path_str(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let preds = dir.path().join("pred.csv");
    let out = srt(&["predict", "--model", path_str(&model), "--data", path_str(&data), "--out", path_str(&preds)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prediction"));
    let values: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 60);
    let truth = fs::read_to_string(&data).unwrap();
    for (v, row) in values.iter().zip(truth.lines().skip(1)) {
        let y: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((v - y).abs() < 1e-6 * (1.0 + y.abs()), "{v} vs {y}");
    }

    let wide = linear_csv(dir.path(), "wide.csv", true);
    let out = srt(&["predict", "--model", path_str(&model), "--data", path_str(&wide)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("features"));
}

#[test]
fn crossval_report_shape_and_determinism() {
    let dir = TempDir::new().unwrap();
    let data = linear_csv(dir.path(), "lin.csv", false);
    let cfg = write_config(dir.path(), "max_macro_iters = 1\ninit_repeats = 1\n");
    let run = |name: &str| {
        let report = dir.path().join(name);
        let out = srt(&[
            "crossval", "--data", path_str(&data), "--config", path_str(&cfg),
            "--folds", "4", "--seeds", "20", "--out", path_str(&report),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(report).unwrap()
    };
    let first = run("a.json");
    let parsed = RunReport::from_json(&first).unwrap();
    assert_eq!(parsed.variants.len(), 1);
    assert_eq!(parsed.variants[0].runs.len(), 80);
    let echoed = TrainConfig::parse(&parsed.config).unwrap();
    assert_eq!(echoed.max_macro_iters, 1);
    assert!(dir.path().join("a.timings.json").exists());

    // same name so the artifact list matches byte for byte
    fs::rename(dir.path().join("a.json"), dir.path().join("first.json")).unwrap();
    assert_eq!(run("a.json"), first);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(srt(&["train"]).status.code(), Some(2));
    assert_eq!(srt(&["frobnicate"]).status.code(), Some(2));
}
