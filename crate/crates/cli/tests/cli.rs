//! End-to-end runs of the `duplex` binary: exit codes and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn write_config(dir: &Path, body: Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

fn base_config(out: &Path) -> Value {
    json!({
        "name": "smoke",
        "topology": {"preset": "five_node_switching"},
        "hr_top": {"I": 3.2, "r": 0.01},
        "hr_bottom": {"I": 3.27, "r": 0.01},
        "coupling": {"alpha": 0.225, "beta": 0.3, "sigma": 0.5, "sigma_on": 20.0},
        "integration": {"dt": 0.01, "transient": 0.0, "t_end": 40.0, "stride": 10, "seed": 3},
        "output": {"dir": out, "trajectory": true}
    })
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duplex"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

#[test]
fn patterns_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config(&dir.path().join("out")));
    let out = run(&["patterns"], &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/smoke_patterns.json")).unwrap()).unwrap();
    assert!(report["bottom"]["patterns"].as_array().unwrap().len() > 1);
}

#[test]
fn compat_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config(&dir.path().join("out")));
    let out = run(&["compat"], &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/smoke_compat.json").exists());
}

#[test]
fn simulate_writes_all_series_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config(&dir.path().join("out")));
    let out = run(&["simulate", "--alpha", "0.1", "--seed", "9"], &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for suffix in ["_report.json", "_trajectory.csv", "_errors_bottom.csv", "_errors_top.csv"] {
        assert!(dir.path().join(format!("out/smoke{suffix}")).exists(), "{suffix}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/smoke_report.json")).unwrap()).unwrap();
    let text = report.to_string();
    assert!(text.contains("0.1"));
    let header = fs::read_to_string(dir.path().join("out/smoke_trajectory.csv")).unwrap();
    assert!(header.starts_with("t,x1_v,x1_w,x1_z,"));
}

#[test]
fn missing_config_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["patterns"], &dir.path().join("absent.json"));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn invalid_config_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = base_config(&dir.path().join("out"));
    body["coupling"]["beta"] = json!(-1.0);
    let config = write_config(dir.path(), body);
    assert_eq!(run(&["patterns"], &config).status.code(), Some(2));

    let mut body = base_config(&dir.path().join("out"));
    body["unknown"] = json!(1);
    let config = write_config(dir.path(), body);
    assert_eq!(run(&["patterns"], &config).status.code(), Some(2));
}

#[test]
fn sweep_without_grid_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config(&dir.path().join("out")));
    assert_eq!(run(&["sweep"], &config).status.code(), Some(2));
}

#[test]
fn blow_up_is_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = base_config(&dir.path().join("out"));
    body["integration"]["dt"] = json!(5.0);
    body["integration"]["t_end"] = json!(2000.0);
    body["coupling"]["sigma_on"] = json!(1000.0);
    body["lyapunov"] = json!({"renorm_interval": 5.0});
    let config = write_config(dir.path(), body);
    let out = run(&["simulate"], &config);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let config = write_config(dir.path(), base_config(&blocker.join("out")));
    assert_eq!(run(&["patterns"], &config).status.code(), Some(4));
}
