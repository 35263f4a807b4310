use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bqstab_cli::Manifest;

fn bqstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bqstab")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_tables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"lengthscales": [0.4], "n_max": 8}"#);
    let out = tmp.path().join("out");
    let res =
        bqstab(&["run", "--experiment", "fig4_runge", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.experiment, "fig4_runge");
    assert_eq!(manifest.config.seed, Some(3));
    assert_eq!(manifest.config.lengthscales, Some(vec![0.4]));
    for f in &manifest.files {
        let bytes = fs::read(out.join(&f.name)).unwrap();
        assert_eq!(bqstab_cli::output::sha256_hex(&bytes), f.sha256);
    }
    let csv = fs::read_to_string(out.join("fig4_stability.csv")).unwrap();
    assert!(csv.starts_with("lengthscale,n,lambda,"));
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"experiment": "fig5_matern_random", "n_max": 12, "runs": 4}"#);
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let res =
            bqstab(&["run", "--experiment", "fig5_matern_random", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(res.status.success());
    }
    for name in ["fig5_summary.csv", "fig5_runs.csv", "fig5_max_run.csv"] {
        assert_eq!(fs::read(dirs[0].join(name)).unwrap(), fs::read(dirs[1].join(name)).unwrap(), "{name}");
    }
}

#[test]
fn validate_config_prints_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"experiment": "fig2_optimal_2d"}"#);
    let res = bqstab(&["validate-config", &cfg]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("\"restarts\": 20") && text.contains("\"n_values\""));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.json", r#"{"experiment": "fig4_runge", "lengthscales": []}"#);
    assert_eq!(bqstab(&["validate-config", &bad]).status.code(), Some(2));
    let garbled = write(tmp.path(), "garbled.json", "{not json");
    assert_eq!(bqstab(&["validate-config", &garbled]).status.code(), Some(2));
    let other = write(tmp.path(), "other.json", r#"{"experiment": "fig3_random_positivity"}"#);
    let out = tmp.path().join("out");
    let res = bqstab(&["run", "--experiment", "fig4_runge", "--config", &other, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numeric_failures_exit_with_three_after_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"kernel": {"family": "gaussian", "lengthscale": 100.0, "dim": 1},
            "measure": {"kind": "uniform_box", "dim": 1, "lower": [0], "upper": [1]},
            "n_values": [2, 40]}"#,
    );
    let out = tmp.path().join("out");
    let res = bqstab(&["run", "--experiment", "custom", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let csv = fs::read_to_string(out.join("custom_diagnostics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].ends_with(",ok"));
    assert!(!rows[1].ends_with(",ok"));
}
