//! End-to-end runs of the `wpcert` binary: exit codes, error messages,
//! report files and a few numeric spot checks.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wpcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpcert")).args(args).env_remove("OUTPUT_DIR").output().expect("run wpcert")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "wpcert failed: {}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

const COINS: &str = r#"{
  "vertices": ["0", "1"],
  "edges": [],
  "outcomes": [
    {"p": 0.25, "values": {"0": -1, "1": -1}},
    {"p": 0.25, "values": {"0": -1, "1": 1}},
    {"p": 0.25, "values": {"0": 1, "1": -1}},
    {"p": 0.25, "values": {"0": 1, "1": 1}}
  ]
}"#;

#[test]
fn bound_on_an_exact_model_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "coins.json", COINS);
    let cfg = write(dir.path(), "run.conf", "[model]\nfile = coins.json\n\n[bound]\np = 2\n");
    let out = dir.path().join("out");
    let o = wpcert(&["bound", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let v = json(&o);
    assert_eq!(v["model"]["backend"], "exact");
    let entries = v["remainder_table"]["entries"].as_array().unwrap();
    let r11 = entries.iter().find(|e| e["j"] == 1).unwrap()["value"].as_f64().unwrap();
    let r21 = entries.iter().find(|e| e["j"] == 2).unwrap()["value"].as_f64().unwrap();
    assert!((r11 - 2f64.sqrt()).abs() < 1e-14);
    assert!((r21 - 1.5).abs() < 1e-14);
    for name in ["bound.json", "bound.csv", "bound.txt"] {
        assert!(out.join(name).is_file(), "{name} written");
    }
    assert_eq!(std::fs::read(out.join("bound.json")).unwrap(), o.stdout);
}

#[test]
fn missing_model_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "[model]\nfile = nowhere.json\n\n[bound]\np = 1\n");
    let o = wpcert(&["bound", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.file"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = wpcert(&["bound", "--config", "/nonexistent/run.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_sizes_name_the_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.conf",
        "[model]\ngenerator = mdep_ma\n\n[simulate]\nsizes = 64, sixty\np = 1\n",
    );
    let o = wpcert(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("simulate.sizes") && e.contains("line 5"), "{e}");

    let cfg = write(dir.path(), "run2.conf", "[model]\ngenerator = mdep_ma\n\n[simulate]\nsizes = 64, 32, 128\np = 1\n");
    let o = wpcert(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("simulate.sizes"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "[bound]\np = 1\nbudjet = 10\n");
    let o = wpcert(&["bound", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bound.budjet"), "{}", stderr(&o));
}

#[test]
fn selftest_passes_with_the_shipped_golden_file() {
    let o = wpcert(&["selftest"]);
    let v = json(&o);
    assert_eq!(v["failed"], 0);
    assert_eq!(v["passed"], 20);
}

#[test]
fn corrupted_golden_values_fail_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let golden = write(
        dir.path(),
        "golden.json",
        r#"{"checks": [
            {"name": "gaussian_moment_4", "expected": 3, "tol": 0},
            {"name": "choose_q_u_0.01", "expected": 2501, "tol": 0}
        ]}"#,
    );
    let cfg = write(dir.path(), "run.conf", &format!("[selftest]\ngolden = {golden}\n"));
    let o = wpcert(&["selftest", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("choose_q_u_0.01") && !e.contains("gaussian_moment_4"), "{e}");
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["failed"], 1);
}

#[test]
fn unreadable_golden_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "golden.json", "{\"checks\": [");
    let cfg = write(dir.path(), "run.conf", "[selftest]\ngolden = golden.json\n");
    let o = wpcert(&["selftest", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("selftest.golden"), "{}", stderr(&o));
}

#[test]
fn match_branches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.conf", "[match]\np = 2\nu = 0\n");
    let v = json(&wpcert(&["match", "--config", &cfg]));
    assert_eq!(v["gaussian_branch"], true);

    let cfg = write(dir.path(), "small.conf", "[match]\np = 2\nu = 0.01\n");
    let v = json(&wpcert(&["match", "--config", &cfg]));
    assert_eq!(v["gaussian_branch"], false);
    assert_eq!(v["q"], 2500);
    let kappa3 = v["cumulants"]["values"][2].as_f64().unwrap();
    assert!((kappa3 - 0.5).abs() < 1e-10, "κ₃ = {kappa3}");
}

#[test]
fn csv_and_table_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "[stein]\nh = square\nw = -1, 0, 2\n");
    let o = wpcert(&["stein", "--config", &cfg, "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 4, "{text}");
    assert!(text.lines().all(|l| l.split(',').count() == text.lines().next().unwrap().split(',').count()));
    let o = wpcert(&["stein", "--config", &cfg, "--format", "table"]);
    assert!(o.status.success());
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "[tail]\nt = 1, 2, 3\nbeta = 1\np = 1\nwp = 0.01\n");
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_wpcert"))
        .args(["tail", "--config", &cfg])
        .env("OUTPUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("tail.csv").is_file());
}

#[test]
fn bundled_configs() {
    let o = wpcert(&["bound", "--config", "bundled:no_such_config"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mdep_m1_p1"), "{}", stderr(&o));
    let o = wpcert(&["bound", "--config", "bundled:ustat_sum_p2", "--workers", "2"]);
    let v = json(&o);
    assert_eq!(v["p"], 2.0);
    assert_eq!(v["model"]["sigma_estimated"], true);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "[tail]\nt = 1\nbeta = 1\np = 1\nwp = 0.01\n");
    let blocker = write(dir.path(), "file", "not a directory");
    let o = wpcert(&["tail", "--config", &cfg, "--out", &blocker]);
    assert_eq!(o.status.code(), Some(1));
}
