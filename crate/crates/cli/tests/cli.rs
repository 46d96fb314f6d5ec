use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn feastest(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feastest"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FEASTEST_SEED")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str], out: &Path) -> String {
    let o = feastest(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn code(args: &[&str]) -> i32 {
    let dir = tempfile::tempdir().unwrap();
    feastest(args, dir.path()).status.code().unwrap()
}

#[test]
fn zero_noise_fixture_fails_to_reject() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("h0_true.json");
    let stdout = run_ok(&["test", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(stdout.contains("verdict: fail-to-reject"));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["result"]["decision"], "fail-to-reject");
    assert_eq!(report["result"]["report"]["solution"]["mu"].as_f64(), Some(0.0));
    assert_eq!(report["tool"], "feastest");
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["seeds"]["threshold"], 7);
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
    // Defaults are echoed into the artifact.
    assert_eq!(report["config"]["scaling"], "mean_square");
    assert_eq!(report["config"]["options"]["q"], "inf");
}

#[test]
fn rerun_is_byte_identical() {
    let cfg = fixture("h1_ci.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(&["ci", "--config", cfg.to_str().unwrap()], a.path());
    run_ok(&["ci", "--config", cfg.to_str().unwrap()], b.path());
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn confidence_interval_has_length_two_r() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("h1_ci.json");
    run_ok(&["ci", "--config", cfg.to_str().unwrap()], dir.path());
    let v = read_json(&dir.path().join("report.json"));
    let ci = &v["result"]["confidence_region"];
    let r = v["result"]["report"]["threshold"]["value"].as_f64().unwrap();
    let (lo, hi) = (ci["lower"].as_f64().unwrap(), ci["upper"].as_f64().unwrap());
    assert!((hi - lo - 2.0 * r).abs() < 1e-12);
    assert!(lo > 0.0);
    assert!(v["result"]["vector_region"]["lower_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_env_overrides_config_seed() {
    let cfg = fixture("threshold.json");
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_feastest"))
        .args(["threshold", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .env("FEASTEST_SEED", "99")
        .output()
        .unwrap();
    assert!(o.status.success());
    let v = read_json(&dir.path().join("threshold.json"));
    assert_eq!(v["seeds"]["threshold"], 99);
    assert_eq!(v["config"]["options"]["seed"], 99);
    let bad = Command::new(env!("CARGO_BIN_EXE_feastest"))
        .args(["threshold", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .env("FEASTEST_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn threshold_reports_separation_and_parts() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["threshold", "--config", fixture("threshold.json").to_str().unwrap()], dir.path());
    let v = read_json(&dir.path().join("threshold.json"));
    let t = &v["result"]["threshold"];
    assert_eq!(t["method"], "min_of_both");
    assert_eq!(t["components"].as_array().unwrap().len(), 2);
    assert!(v["result"]["separation"]["value"].as_f64().unwrap() > t["value"].as_f64().unwrap());
}

#[test]
fn noisy_farkas_verdict_and_plug_in_certificate() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["farkas", "--config", fixture("farkas_noisy.json").to_str().unwrap()], dir.path());
    let v = read_json(&dir.path().join("verdict.json"));
    assert_eq!(v["result"]["mode"], "noisy");
    assert_eq!(v["result"]["verdict"]["decision"], "feasible_not_rejected");
    assert_eq!(v["result"]["plug_in_certificate"]["status"], "feasible");
    assert_eq!(v["result"]["row_order"], serde_json::json!([0, 1, 2]));
}

#[test]
fn exact_farkas_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let a = fixture("A_infeasible.csv");
    let b = fixture("b_infeasible.csv");
    run_ok(&["farkas", "--A", a.to_str().unwrap(), "--b", b.to_str().unwrap()], dir.path());
    let v = read_json(&dir.path().join("verdict.json"));
    assert_eq!(v["result"]["certificate"]["status"], "infeasible");
    assert_eq!(v["result"]["certificate"]["pi"], serde_json::json!([1.0]));
    // Marking rows noisy without a noise scale is a configuration error.
    assert_eq!(code(&["farkas", "--A", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--noisy-rows", "1"]), 4);
}

#[test]
fn bounded_test_runs_on_binary_data() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["bounded-test", "--config", fixture("bounded.json").to_str().unwrap()], dir.path());
    let v = read_json(&dir.path().join("report.json"));
    assert_eq!(v["result"]["report"]["threshold"]["method"], "rademacher");
    assert_eq!(v["result"]["decision"], "fail-to-reject");
}

#[test]
fn diagnose_table_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(&["diagnose", "--config", fixture("diagnose_table2.json").to_str().unwrap()], dir.path());
    assert!(stdout.contains("no warnings"));
    let v = read_json(&dir.path().join("diagnostics.json"));
    assert_eq!(v["result"]["bracket"]["contains_estimate"], true);
    let stdout = run_ok(&["diagnose", "--config", fixture("diagnose_warn.json").to_str().unwrap()], dir.path());
    assert!(stdout.contains("p - n = 70"));
}

#[test]
fn simulate_writes_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["simulate", "--config", fixture("smoke_study.json").to_str().unwrap(), "--threads", "2"], dir.path());
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "name,n,p,l,ape,separation,two_r,coverage,rejection,reps,failed");
    assert!(lines.next().unwrap().starts_with("smoke,30,3,3,"));
    let v = read_json(&dir.path().join("study_report.json"));
    assert_eq!(v["result"]["records"].as_array().unwrap().len(), 4);
    let again = tempfile::tempdir().unwrap();
    run_ok(&["simulate", "--config", fixture("smoke_study.json").to_str().unwrap()], again.path());
    assert_eq!(
        std::fs::read(dir.path().join("study_report.json")).unwrap(),
        std::fs::read(again.path().join("study_report.json")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    assert_eq!(code(&["test"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["test", "--config", "/nonexistent/config.json"]), 3);
    assert_eq!(code(&["test", "--config", &write("bad.json", "{ not json")]), 4);
    let good = std::fs::read_to_string(fixture("h0_true.json")).unwrap();
    let data = fixture("h0_data.csv");
    let good = good.replace("\"h0_data.csv\"", &format!("{:?}", data.to_str().unwrap()));
    let unknown = good.replacen("\"model\"", "\"modle_typo\": 1, \"model\"", 1);
    assert_eq!(code(&["test", "--config", &write("unknown.json", &unknown)]), 4);
    let undeclared = good.replace("a + b*v + c*w", "a + b*v + d*w");
    assert_eq!(code(&["test", "--config", &write("undeclared.json", &undeclared)]), 4);
    write("broken.csv", "v,w,y\n1,2,3\n4,oops,6\n");
    let broken = good.replace(&format!("{:?}", data.to_str().unwrap()), &format!("{:?}", dir.path().join("broken.csv").to_str().unwrap()));
    assert_eq!(code(&["test", "--config", &write("broken.json", &broken)]), 5);
    let missing_col = good.replace("\"response\": \"y\"", "\"response\": \"z\"");
    assert_eq!(code(&["test", "--config", &write("missing.json", &missing_col)]), 5);
    assert_eq!(code(&["simulate", "--preset", "table9_n30_L4"]), 4);
}
