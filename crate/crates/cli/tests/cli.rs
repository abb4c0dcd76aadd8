use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rebalance"));
    c.env_remove("REBALANCE_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Raw CSV with a categorical, a binary and two numerical columns; one row
/// in `every` is positive.
fn write_raw(dir: &Path, rows: usize, every: usize) -> (PathBuf, PathBuf) {
    let csv = dir.join("raw.csv");
    let mut text = String::from("colour,smoker,age,income,outcome\n");
    for i in 0..rows {
        let pos = i % every == 0;
        let colour = ["red", "green", "blue"][(i * 7) % 3];
        let smoker = if (i * 13) % 5 < 2 || pos { "yes" } else { "no" };
        let jitter = ((i * 37) % 100) as f64 / 100.0;
        let age = if pos {
            50.0 + 20.0 * jitter
        } else {
            30.0 + 25.0 * jitter
        };
        let income = 1000.0 + ((i * 53) % 97) as f64 * 10.0;
        let label = if pos { "sick" } else { "healthy" };
        text.push_str(&format!("{colour},{smoker},{age:.1},{income:.0},{label}\n"));
    }
    fs::write(&csv, text).unwrap();
    let meta = dir.join("meta.json");
    fs::write(
        &meta,
        r#"{
  "name": "toy",
  "label": "outcome",
  "positive_class": "sick",
  "variables": [
    {"name": "colour", "kind": "categorical"},
    {"name": "smoker", "kind": "binary"},
    {"name": "age", "kind": "numerical"},
    {"name": "income", "kind": "numerical"}
  ]
}"#,
    )
    .unwrap();
    (csv, meta)
}

fn preprocessed(dir: &Path, rows: usize, every: usize) -> PathBuf {
    let (csv, meta) = write_raw(dir, rows, every);
    let data = dir.join("data");
    ok(&[
        "preprocess",
        "--csv",
        p(&csv),
        "--metadata",
        p(&meta),
        "--out",
        p(&data),
    ]);
    data
}

fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("grid.json");
    fs::write(
        &path,
        r#"{
  "classifier": {"n_estimators": 10, "max_depth": 2, "learning_rate": 0.3},
  "generator": {"epochs": 2, "pretrain_epochs": 2, "hidden": [8], "latent": 4, "batch_size": 32}
}"#,
    )
    .unwrap();
    path
}

#[test]
fn preprocess_writes_encoded_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, meta) = write_raw(dir.path(), 60, 4);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[
        "preprocess",
        "--csv",
        p(&csv),
        "--metadata",
        p(&meta),
        "--out",
        p(&a),
    ]);
    ok(&[
        "preprocess",
        "--csv",
        p(&csv),
        "--metadata",
        p(&meta),
        "--out",
        p(&b),
    ]);
    for f in ["encoded.csv", "metadata.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("run-preprocess.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "preprocess");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 2);
    let header = fs::read_to_string(a.join("encoded.csv")).unwrap();
    assert_eq!(header.lines().count(), 61);
}

#[test]
fn malformed_metadata_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, meta) = write_raw(dir.path(), 20, 4);
    fs::write(&meta, r#"{"label": "outcome", "variables": 3}"#).unwrap();
    let out = run(&[
        "preprocess",
        "--csv",
        p(&csv),
        "--metadata",
        p(&meta),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema error"));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["grid"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn grid_record_counts_replay_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocessed(dir.path(), 400, 5);
    let cfg = fast_config(dir.path());
    let out = dir.path().join("grid");
    let args = [
        "grid",
        "--data",
        p(&data),
        "--config",
        p(&cfg),
        "--methods",
        "random_over",
        "--usr-grid",
        "0.5",
        "--osr-grid",
        "0.6",
        "--folds",
        "10",
        "--seed",
        "3",
        "--out",
        p(&out),
    ];
    ok(&args);
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let body: Vec<&str> = results.lines().skip(1).collect();
    assert_eq!(body.len(), 30);
    for m in ["classifier", "random_under", "random_over"] {
        assert_eq!(
            body.iter()
                .filter(|l| l.split(',').nth(1) == Some(m))
                .count(),
            10
        );
    }
    assert!(out.join("run-grid.json").exists());

    let replay = dir.path().join("replay");
    ok(&[
        "grid",
        "--data",
        p(&data),
        "--config",
        p(&out.join("manifest.json")),
        "--jobs",
        "4",
        "--out",
        p(&replay),
    ]);
    for f in ["results.csv", "summary.md"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(replay.join(f)).unwrap(),
            "{f}"
        );
    }

    let report = dir.path().join("report");
    ok(&[
        "report",
        "--results",
        p(&out.join("results.csv")),
        "--out",
        p(&report),
    ]);
    let md = fs::read_to_string(report.join("summary.md")).unwrap();
    assert_eq!(md, fs::read_to_string(out.join("summary.md")).unwrap());
    assert!(report.join("summary.csv").exists());

    let figs = dir.path().join("figs");
    ok(&[
        "viz",
        "--kind",
        "heatmap",
        "--results",
        p(&out.join("results.csv")),
        "--out",
        p(&figs),
    ]);
    let svgs: Vec<_> = fs::read_dir(&figs)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 1);
    assert!(svgs[0]
        .file_name()
        .to_string_lossy()
        .contains("random_over"));
}

#[test]
fn invalid_ratio_grid_reports_offending_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocessed(dir.path(), 100, 5);
    let cfg = fast_config(dir.path());
    let out = run(&[
        "grid",
        "--data",
        p(&data),
        "--config",
        p(&cfg),
        "--usr-grid",
        "1.5",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.5"));
}

#[test]
fn rejection_on_extreme_imbalance_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocessed(dir.path(), 600, 50);
    let cfg = fast_config(dir.path());
    let out = dir.path().join("grid");
    ok(&[
        "grid",
        "--data",
        p(&data),
        "--config",
        p(&cfg),
        "--methods",
        "vae",
        "--sampling",
        "rejection",
        "--usr-grid",
        "0.5",
        "--osr-grid",
        "1.0",
        "--folds",
        "3",
        "--draw-limit",
        "20",
        "--epochs",
        "60",
        "--jobs",
        "3",
        "--out",
        p(&out),
    ]);
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results
        .lines()
        .any(|l| l.starts_with("toy,vae,rejection,") && l.ends_with(",timeout")));
    let md = fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(md.contains("*Timeout*"));
}

#[test]
fn train_sample_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocessed(dir.path(), 200, 4);
    let train = |out: &Path| {
        ok(&[
            "train",
            "--data",
            p(&data),
            "--model",
            "mv-vae",
            "--epochs",
            "3",
            "--seed",
            "9",
            "--out",
            p(out),
        ]);
        out.join("mv-vae-minority.model.json")
    };
    let m1 = train(&dir.path().join("m1"));
    let m2 = train(&dir.path().join("m2"));
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    let samples = dir.path().join("s");
    ok(&[
        "sample",
        "--model",
        p(&m1),
        "--strategy",
        "minority",
        "--n",
        "100",
        "--out",
        p(&samples),
    ]);
    let text = fs::read_to_string(samples.join("samples.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "colour,smoker,age,income,label");
    assert_eq!(lines.len(), 101);
    assert!(lines[1..]
        .iter()
        .all(|l| ["red", "green", "blue"].contains(&l.split(',').next().unwrap())));

    let bad = run(&[
        "sample",
        "--model",
        p(&m1),
        "--strategy",
        "rejection",
        "--out",
        p(&samples),
    ]);
    assert_eq!(bad.status.code(), Some(8));

    let figs = dir.path().join("diag");
    ok(&[
        "viz",
        "--kind",
        "diagnostics",
        "--data",
        p(&data),
        "--model",
        p(&m1),
        "--n-real",
        "100",
        "--n-synth",
        "50",
        "--tsne-iterations",
        "100",
        "--som-epochs",
        "5",
        "--perplexity",
        "10",
        "--out",
        p(&figs),
    ]);
    for kind in ["pca", "tsne", "som"] {
        assert!(
            figs.join(format!("toy__mv-vae__minority__{kind}.svg"))
                .exists(),
            "{kind}"
        );
    }
    ok(&[
        "viz",
        "--kind",
        "diagnostics",
        "--data",
        p(&data),
        "--method",
        "smote",
        "--n-real",
        "100",
        "--n-synth",
        "50",
        "--tsne-iterations",
        "100",
        "--som-epochs",
        "5",
        "--perplexity",
        "10",
        "--out",
        p(&figs),
    ]);
    assert!(figs.join("toy__smote__none__som.svg").exists());
}

#[test]
fn output_directory_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, meta) = write_raw(dir.path(), 30, 3);
    let target = dir.path().join("env-out");
    let out = bin()
        .args(["preprocess", "--csv", p(&csv), "--metadata", p(&meta)])
        .env("REBALANCE_OUT", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("encoded.csv").exists());
    let flag = dir.path().join("flag-out");
    let out = bin()
        .args([
            "preprocess",
            "--csv",
            p(&csv),
            "--metadata",
            p(&meta),
            "--out",
            p(&flag),
        ])
        .env("REBALANCE_OUT", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag.join("encoded.csv").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = preprocessed(dir.path(), 200, 4);
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"folds": 4, "seed": 1, "usr_grid": [0.5], "osr_grid": [1.0], "methods": ["smote"],
            "classifier": {"n_estimators": 5, "max_depth": 2}}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    ok(&[
        "grid",
        "--data",
        p(&data),
        "--config",
        p(&cfg),
        "--folds",
        "3",
        "--out",
        p(&out),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["folds"], 3);
    assert_eq!(manifest["config"]["seed"], 1);
    assert_eq!(manifest["config"]["methods"][0], "smote");
}
