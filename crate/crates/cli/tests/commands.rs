//! End-to-end checks of the mixclean binary: artifact shapes, exit
//! codes, manifest contents, determinism, and rerun fidelity.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn mixclean(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixclean"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).expect("config written");
    path.to_string_lossy().into_owned()
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).expect("file readable"))
        .expect("valid JSON")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn demo_writes_a_gap_free_report() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("demo");
    let out = mixclean(&["demo-nonidentifiability", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let report = json_file(&out_dir.join("nonidentifiability.json"));
    assert!(report["marginal_gap"].as_f64().unwrap() < 1e-12);
    assert!(report["parameter_distance"].as_f64().unwrap() > 0.1);
    for key in ["first", "second"] {
        let transition = report[key]["transition"].as_array().unwrap();
        assert_eq!(transition.len(), 3);
        assert_eq!(transition[0].as_array().unwrap().len(), 3);
    }
    let manifest = json_file(&out_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "demo-nonidentifiability");
    assert_eq!(
        manifest["artifacts"].as_array().unwrap(),
        &vec![serde_json::json!("nonidentifiability.json")]
    );
}

#[test]
fn synthetic_data_regenerates_identically() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = mixclean(&[
            "make-synthetic",
            "--seed",
            "42",
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    }
    for file in ["features.csv", "true_labels.csv", "noisy_labels.csv"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn zero_noise_leaves_labels_untouched() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "synth.json", r#"{"noise": {"rate": 0.0}}"#);
    let out_dir = dir.path().join("synth");
    let out = mixclean(&[
        "make-synthetic",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert_eq!(
        fs::read(out_dir.join("true_labels.csv")).unwrap(),
        fs::read(out_dir.join("noisy_labels.csv")).unwrap()
    );
}

#[test]
fn symmetric_noise_hits_the_requested_rate_at_scale() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "synth.json",
        r#"{"sample_count": 10000, "noise": {"kind": "symmetric", "rate": 0.4}}"#,
    );
    let out_dir = dir.path().join("synth");
    let out = mixclean(&[
        "make-synthetic",
        "--config",
        &config,
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let clean = fs::read_to_string(out_dir.join("true_labels.csv")).unwrap();
    let noisy = fs::read_to_string(out_dir.join("noisy_labels.csv")).unwrap();
    let flipped = clean
        .lines()
        .zip(noisy.lines())
        .filter(|(c, n)| c != n)
        .count();
    let rate = flipped as f64 / 10000.0;
    assert!((rate - 0.4).abs() <= 0.015, "empirical flip rate {rate}");
}

#[test]
fn fit_maps_failures_to_documented_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let run = |labels: &str| {
        mixclean(&["fit", "--labels", labels, "--out", out_dir.to_str().unwrap(), "--quiet"])
    };

    let missing = dir.path().join("absent.csv");
    let out = run(missing.to_str().unwrap());
    assert_eq!(out.status.code(), Some(3), "missing file: {}", stderr_of(&out));

    let garbled = dir.path().join("garbled.csv");
    fs::write(&garbled, "2,1\n2,x\n").unwrap();
    let out = run(garbled.to_str().unwrap());
    assert_eq!(out.status.code(), Some(1), "bad field: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains(":2"), "missing line number: {}", stderr_of(&out));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = run(empty.to_str().unwrap());
    assert_eq!(out.status.code(), Some(1), "empty file: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("L = 0"), "stderr: {}", stderr_of(&out));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "2,1\n1,1\n").unwrap();
    let out = run(ragged.to_str().unwrap());
    assert_eq!(out.status.code(), Some(1), "trial mismatch: {}", stderr_of(&out));
}

#[test]
fn fit_warns_when_trials_sit_below_the_bound() {
    let dir = TempDir::new().unwrap();
    let labels = dir.path().join("sets.csv");
    fs::write(&labels, "2,0\n1,1\n0,2\n2,0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = mixclean(&[
        "fit",
        "--labels",
        labels.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let manifest = json_file(&out_dir.join("manifest.json"));
    let warnings = manifest["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].as_str().unwrap().contains("identifiability bound 3"));

    let result = json_file(&out_dir.join("fit_result.json"));
    assert_eq!(result["class_count"], 2);
    assert_eq!(result["trials"], 2);
    let pi: Vec<f64> =
        result["pi"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn sweep_reports_the_bound_for_every_row() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "sweep.json",
        r#"{
            "class_counts": [2, 100],
            "trial_grid": [1],
            "set_grid": [60],
            "reps": 1,
            "inits": 1,
            "holdout_sets": 20,
            "em": {"mode": "mle", "max_iters": 25}
        }"#,
    );
    let out_dir = dir.path().join("sweep");
    let out = mixclean(&[
        "identifiability-sweep",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let table = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "class_count,trials,label_sets,rep,bound,recovery_error,disagreement,holdout_gap"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    // Bound column: 2·C − 1 per row, including the C = 100 → 199 case.
    assert!(rows.iter().any(|r| r[0] == "2" && r[4] == "3"));
    assert!(rows.iter().any(|r| r[0] == "100" && r[4] == "199"));
}

#[test]
fn clean_runs_a_directory_and_carries_warnings() {
    let dir = TempDir::new().unwrap();
    let data_dir = dir.path().join("data");
    let out = mixclean(&[
        "make-synthetic",
        "--seed",
        "3",
        "--out",
        data_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let config = write_config(
        dir.path(),
        "clean.json",
        r#"{"epochs": 2, "trials": 1, "label_sets": 30}"#,
    );
    let out_dir = dir.path().join("run");
    let out = mixclean(&[
        "clean",
        "--data",
        data_dir.to_str().unwrap(),
        "--config",
        &config,
        "--seed",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let reports = json_file(&out_dir.join("reports.json"));
    assert_eq!(reports.as_array().unwrap().len(), 2);
    for epoch in reports.as_array().unwrap() {
        assert!(epoch["clean_fraction"].as_f64().is_some());
    }

    let posteriors = fs::read_to_string(out_dir.join("posteriors.csv")).unwrap();
    let rows: Vec<&str> = posteriors.lines().collect();
    assert_eq!(rows.len(), 1000);
    for row in &rows {
        let total: f64 = row.split(',').map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    let pseudo = fs::read_to_string(out_dir.join("pseudo_labels.csv")).unwrap();
    assert_eq!(pseudo.lines().count(), 1000);

    // trials = 1 sits below the bound 3 for 2 classes.
    let manifest = json_file(&out_dir.join("manifest.json"));
    let warnings = manifest["warnings"].as_array().unwrap();
    assert!(
        warnings.iter().any(|w| w.as_str().unwrap().contains("bound")),
        "warnings: {warnings:?}"
    );
}

#[test]
fn missing_data_directory_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = mixclean(&[
        "clean",
        "--data",
        dir.path().join("nowhere").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "bad.json", r#"{"sample_cuont": 10}"#);
    let out = mixclean(&[
        "make-synthetic",
        "--config",
        &config,
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("unknown field"), "stderr: {}", stderr_of(&out));
}

#[test]
fn rerun_reproduces_fit_outputs_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let labels = dir.path().join("sets.csv");
    fs::write(&labels, "3,0\n2,1\n0,3\n1,2\n3,0\n0,3\n").unwrap();
    let first = dir.path().join("first");
    let out = mixclean(&[
        "fit",
        "--labels",
        labels.to_str().unwrap(),
        "--seed",
        "21",
        "--out",
        first.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let second = dir.path().join("second");
    let out = mixclean(&[
        "rerun",
        "--manifest",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert_eq!(
        fs::read(first.join("fit_result.json")).unwrap(),
        fs::read(second.join("fit_result.json")).unwrap()
    );
}

#[test]
fn thread_settings_are_accepted_from_flag_and_environment() {
    let dir = TempDir::new().unwrap();
    let out = mixclean(&[
        "demo-nonidentifiability",
        "--threads",
        "2",
        "--out",
        dir.path().join("a").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let out = Command::new(env!("CARGO_BIN_EXE_mixclean"))
        .env("MIXCLEAN_THREADS", "2")
        .args([
            "demo-nonidentifiability",
            "--out",
            dir.path().join("b").to_str().unwrap(),
            "--quiet",
        ])
        .output()
        .expect("binary spawns");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
}
