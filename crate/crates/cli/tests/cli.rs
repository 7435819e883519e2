use std::path::Path;
use std::process::{Command, Output};

fn watchdog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_watchdog"))
        .args(args)
        .env_remove("WATCHDOG_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const CONFIG: &str = r#"{
  "n": 8, "h": 3,
  "p12": 0.1, "p21": 0.1, "p31": 0.1, "p32": 0.1,
  "epsilon": 0.01,
  "adversary": "random_nonzero_error",
  "trials": 500,
  "seed": 11
}"#;

#[test]
fn predict_prints_values() {
    let out = watchdog(&["predict", "--n", "8", "--h", "4", "--r12", "2", "--r21", "2", "--r31", "2", "--r32", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("predicted_beta   1.886"), "{text}");
}

#[test]
fn predict_no_overhear() {
    let out = watchdog(&["predict", "--n", "8", "--h", "2", "--r31", "1", "--r32", "3", "--no-overhear"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // 9 / 8^2
    assert!(text.contains("beta_no_overhear 1.406250e-1"), "{text}");
}

#[test]
fn predict_missing_radii_is_validation_error() {
    let out = watchdog(&["predict", "--n", "8", "--h", "4", "--r31", "2", "--r32", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = watchdog(&["selftest"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{text}");
}

#[test]
fn simulate_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let json = dir.path().join("r.json");
    let out = watchdog(&["simulate", "--config", &cfg, "--out", json.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rep["config"]["trials"], 500);
    assert_eq!(rep["radii"]["r31"], 3);

    let csv = dir.path().join("r.csv");
    let out = watchdog(&[
        "simulate", "--config", &cfg, "--trials", "50", "--out", csv.to_str().unwrap(), "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn simulate_is_reproducible_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = |w: &str| {
        let out = watchdog(&["simulate", "--config", &cfg, "--workers", w]);
        assert!(out.status.success());
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_secs");
        v
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn sweep_emits_one_report_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let csv = dir.path().join("s.csv");
    let out = watchdog(&[
        "sweep", "--config", &cfg, "--axis", "h", "--values", "1,2,3", "--out", csv.to_str().unwrap(), "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);
}

#[test]
fn unknown_axis_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = watchdog(&["sweep", "--config", &cfg, "--axis", "colour", "--values", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"h\": 3", "\"h\": 9"));
    let out = watchdog(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("h = 9"));
}

#[test]
fn io_failures_exit_3() {
    let out = watchdog(&["simulate", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = watchdog(&["simulate", "--config", &cfg, "--out", "/nonexistent/dir/r.json"]);
    assert_eq!(out.status.code(), Some(3));
}
