use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_groundinst"))
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn run_json(args: &[&str]) -> Value {
    let out = bin().arg("--json").args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn solve_fig1_reports_json() {
    let v = run_json(&["solve", corpus().join("fig1.p").to_str().unwrap(), "--seed", "0"]);
    assert_eq!(v["problem"], "fig1");
    assert_eq!(v["policy"], "random");
    assert!(["unsat", "sat"].contains(&v["status"].as_str().unwrap()));
}

#[test]
fn sweep_report_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.jsonl");
    let s = store.to_str().unwrap();
    let v = run_json(&["sweep", corpus().to_str().unwrap(), "--runs", "2", "--store", s]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(v["max_instances_per_clause"].as_u64().unwrap() <= 130);

    let out = dir.path().join("rep");
    let v = run_json(&["report", "--store", s, "--out", out.to_str().unwrap()]);
    assert_eq!(v["files"].as_array().unwrap().len(), 5);
    assert!(std::fs::read_to_string(out.join("cumulative.svg")).unwrap().starts_with("<svg"));

    let v = run_json(&["replay", "--store", s, "--corpus", corpus().to_str().unwrap()]);
    assert!(v["checked"].as_u64().unwrap() > 0);
    assert!(v["failures"].as_array().unwrap().is_empty());

    let v = run_json(&["coverage", "--store", s, "--corpus", corpus().to_str().unwrap(), "--grid", "1,5,25"]);
    assert_eq!(v["grid"], serde_json::json!([1, 5, 25]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn split_of_the_corpus() {
    let v = run_json(&["split", corpus().to_str().unwrap(), "--seed", "4"]);
    let n = |k: &str| v[k].as_array().unwrap().len();
    assert!(n("test") >= 1 && n("dev") >= 1);
    assert_eq!(n("train") + n("dev") + n("test"), 16);
}

#[test]
fn external_policy_over_exec_transport() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.jsonl");
    let endpoint = format!("exec:{} serve-random --stdio --seed 3", env!("CARGO_BIN_EXE_groundinst"));
    let v = run_json(&[
        "sweep",
        corpus().to_str().unwrap(),
        "--runs",
        "1",
        "--policy",
        "external",
        "--endpoint",
        &endpoint,
        "--checkpoint",
        "ck7",
        "--store",
        store.to_str().unwrap(),
    ]);
    assert!(v["rows"][0]["solved"].as_u64().unwrap() > 0);
    let text = std::fs::read_to_string(&store).unwrap();
    assert!(text.lines().all(|l| l.contains(r#""policy":"neural:ck7""#)));
}

#[test]
fn endpoint_from_environment() {
    let out = bin()
        .args(["solve", corpus().join("fig1.p").to_str().unwrap(), "--policy", "external"])
        .env_remove("GROUNDINST_POLICY_ENDPOINT")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("GROUNDINST_POLICY_ENDPOINT"));

    let endpoint = format!("exec:{} serve-random --stdio", env!("CARGO_BIN_EXE_groundinst"));
    let out = bin()
        .args(["--json", "solve", corpus().join("fig1.p").to_str().unwrap(), "--policy", "external"])
        .env("GROUNDINST_POLICY_ENDPOINT", endpoint)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_input_is_an_error_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.p");
    std::fs::write(&f, "cnf(a, axiom, p(X)).\ncnf(b, axiom, p(a,b)).\n").unwrap();
    let out = bin().args(["solve", f.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2:"), "{err}");
}
