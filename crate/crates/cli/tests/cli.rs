use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lagfib"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lagfib-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).arg("--quiet").output().unwrap()
}

const LINE: &str = "[model]\ntau = 20.0\n\n[fan]\nrays = [[1], [-1]]\nweights = [-1, -1]\n";

#[test]
fn malformed_ray_exits_2_with_line() {
    let dir = scratch("ray");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, LINE.replace("[[1], [-1]]", "[[1], [-1, 0]]")).unwrap();
    let out = run(&["describe", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:5:"), "{err}");
}

#[test]
fn unknown_key_and_bad_flag_exit_2() {
    let dir = scratch("keys");
    let cfg = dir.join("k.toml");
    std::fs::write(&cfg, format!("{LINE}\n[spectral]\nmodez = 4\n")).unwrap();
    let out = run(&["describe", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k.toml:9:"));
    let out = run(&["describe", "--c", "1.5"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn describe_writes_tables_with_headers() {
    let dir = scratch("describe");
    let out = run(&["describe"], &dir);
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.join("u_profile.csv")).unwrap();
    assert!(table.starts_with("# table: log-volume profile"));
    assert!(table.lines().any(|l| l.starts_with("# units:")));
    assert!(table.lines().any(|l| l == "x_1,u,du_1,d2u_11"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("describe.json")).unwrap()).unwrap();
    assert_eq!(report["ricci_negative_on_samples"], true);
    assert_eq!(report["volume_minimum"]["x0"][0], 0.0);
}

#[test]
fn solve_fiber_then_report() {
    let dir = scratch("report");
    assert!(run(&["solve-fiber", "--modes", "6", "--stages", "4"], &dir).status.success());
    let fiber: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("fiber.json")).unwrap()).unwrap();
    assert!(fiber["fiber"]["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(fiber["fiber"]["stages"], 4);
    assert!(run(&["report"], &dir).status.success());
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("solve-fiber"));
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = scratch("empty");
    assert_eq!(run(&["report"], &dir).status.code(), Some(3));
}

#[test]
fn sweep_reports_out_of_region_points() {
    let dir = scratch("sweep");
    let out = run(&["sweep", "--grid", "0;15", "--modes", "4", "--stages", "4"], &dir);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["solved"], 1);
    assert_eq!(report["failures"][0]["x"][0], 15.0);
}
