use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copula-proc"))
        .args(args)
        .env("COPULA_PROC_THREADS", "2")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["simulate", "--model", "ca:theta=0.5", "--n", "40", "--seed", "3", "-o", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("x1,x2\n"));
    assert_eq!(text.lines().count(), 41);
    let meta = json(&dir.path().join("s.csv.meta.json"));
    assert_eq!(meta["config"]["seed"], 3);
}

#[test]
fn process_on_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&["simulate", "--model", "indep:d=2", "--n", "80", "--seed", "1", "-o", p(&data)]).status.success());
    let out = dir.path().join("p.json");
    let o = run(&["process", "-i", p(&data), "--class", "indicator:grid=3", "--model", "indep:d=2", "--seed", "2", "-o", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["n"], 80);
    assert_eq!(v["values"].as_object().unwrap().len(), 9);
    assert!(v["sup_abs"].as_f64().unwrap() >= 0.0);
}

#[test]
fn gof_reports_p_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = run(&[
        "gof", "--sample-model", "m", "--n", "200", "--model", "indep:d=2", "--class", "mgf:grid=3", "-B", "99", "--seed", "4",
        "-o", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["B"], 99);
    assert!((v["p_value"].as_f64().unwrap() - 0.01).abs() < 1e-12);
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"dim": 3, "trials": 5, "seed": 11}"#).unwrap();
    let out = dir.path().join("i.json");
    let o = run(&["ibp-check", "--config", p(&cfg), "--trials", "7", "-o", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["config"]["dim"], 3);
    assert_eq!(v["config"]["trials"], 7);
    assert_eq!(v["term_count"], 27);
    assert_eq!(v["passed"], true);
}

#[test]
fn variation_of_product() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = run(&["variation", "--function", "prod", "--dim", "3", "-o", p(&out)]);
    assert!(o.status.success());
    let v = json(&out);
    assert!((v["hk"].as_f64().unwrap() - 8.0).abs() < 1e-3);
}

#[test]
fn mc_study_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = run(&[
        "mc-study", "--model", "indep:d=2", "--class", "indicator:grid=2", "--n", "50", "--reps", "20", "-B", "20", "--trials", "2",
        "--seed", "5", "--format", "csv", "-o", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("level,mc_quantile,boot_quantile,rel_diff\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["simulate", "--model", "frank:theta=2", "--n", "5", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--model", "indep:d=2", "--n", "5"]).status.code(), Some(2));
    assert_eq!(run(&["process", "--class", "bogus", "--sample-model", "w", "--n", "5", "--seed", "1"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let o = run(&["process", "-i", "/nonexistent/x.csv", "--class", "mgf:grid=2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
}
