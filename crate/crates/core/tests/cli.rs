//! End-to-end runs of the `spencer` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spencer_core::report::REPORT_SCHEMA;

fn spencer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spencer"))
        .args(args)
        .output()
        .expect("spawn spencer")
}

fn report(args: &[&str]) -> Value {
    let out = spencer(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn validate(v: &Value) {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let msgs: Vec<String> = match compiled.validate(v) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "schema violations: {msgs:#?}");
}

fn varsolve_config(dir: &Path) -> String {
    let p = dir.join("var.json");
    std::fs::write(
        &p,
        r#"{"lattice": {"d": 2, "n": 3}, "algebra": "A1", "seed": 11,
            "solver": {"step": 0.1, "max_iterations": 400, "tolerance": 1e-8, "max_backtracks": 60}}"#,
    )
    .unwrap();
    p.display().to_string()
}

fn commands(cfg: &str) -> Vec<Vec<String>> {
    let raw: Vec<Vec<&str>> = vec![
        vec!["lie", "info", "--algebra", "G2", "--table"],
        vec!["matrix", "--algebra", "A2", "--k", "2", "--lambda", "preset:random:5"],
        vec!["spencer", "matrix", "--algebra", "A1", "--k", "1", "--variant", "classical"],
        vec!["kernel", "--algebra", "A2", "--k", "2", "--lambda", "preset:cartan1", "--basis", "--decompose"],
        vec!["verify", "--algebra", "A1", "--k-max", "3"],
        vec!["cohomology", "--algebra", "A1", "--k", "2", "--n", "3"],
        vec!["tension", "--algebra", "E7", "--h11", "56"],
        vec!["varsolve", "--config", cfg],
    ];
    raw.into_iter().map(|c| c.into_iter().map(String::from).collect()).collect()
}

#[test]
fn every_command_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = varsolve_config(dir.path());
    for cmd in commands(&cfg) {
        let args: Vec<&str> = cmd.iter().map(String::as_str).collect();
        let a = report(&args);
        let b = report(&args);
        validate(&a);
        assert_eq!(
            serde_json::to_vec_pretty(&a["body"]).unwrap(),
            serde_json::to_vec_pretty(&b["body"]).unwrap(),
            "{args:?}"
        );
        let mut ma = a["manifest"].clone();
        let mut mb = b["manifest"].clone();
        ma["timestamp"] = Value::Null;
        mb["timestamp"] = Value::Null;
        assert_eq!(ma, mb);
    }
}

#[test]
fn lie_info_values() {
    let a1 = report(&["lie", "info", "--algebra", "A1"]);
    assert_eq!(a1["body"]["dim"], 3);
    let e7 = report(&["lie", "info", "--algebra", "E7"]);
    assert_eq!(e7["body"]["dim"], 133);
    assert_eq!(e7["body"]["roots"], 126);
    assert_eq!(e7["body"]["jacobi_holds"], true);
}

#[test]
fn tension_verdicts() {
    let body = |a: &str, h: &str| report(&["tension", "--algebra", a, "--h11", h])["body"].clone();
    let e7 = body("E7", "56");
    assert_eq!((e7["verdict"].as_str(), e7["forced_dim"].as_u64()), (Some("forced_match"), Some(56)));
    let g2 = body("G2", "7");
    assert_eq!((g2["verdict"].as_str(), g2["forced_dim"].as_u64()), (Some("forced_match"), Some(7)));
    let f4 = body("F4", "10");
    assert_eq!(f4["verdict"], "infeasible");
    assert_eq!(f4["lower_bound"], 26);
}

#[test]
fn exit_codes() {
    assert_eq!(spencer(&["lie", "info", "--algebra", "Z9"]).status.code(), Some(2));
    assert_eq!(spencer(&["lie", "info"]).status.code(), Some(2));
    assert_eq!(spencer(&["matrix", "--algebra", "A1", "--k", "1", "--lambda", "bogus"]).status.code(), Some(2));
    let capped = spencer(&["matrix", "--algebra", "E7", "--k", "3", "--max-dim", "100000"]);
    assert_eq!(capped.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("resource cap"));
    assert_eq!(spencer(&["verify", "--algebra", "A1", "--lambda", "preset:zero"]).status.code(), Some(0));
}

#[test]
fn verify_zero_lambda_is_trivial() {
    let v = report(&["verify", "--algebra", "A2", "--lambda", "preset:zero", "--k-max", "2"]);
    assert_eq!(v["body"]["forced_identities_hold"], true);
    for d in v["body"]["degrees"].as_array().unwrap() {
        assert_eq!(d["nilpotency"]["is_zero"], true);
    }
}

#[test]
fn file_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = varsolve_config(dir.path());
    let json = dir.path().join("r.json");
    let csv = dir.path().join("trace.csv");
    let out = spencer(&[
        "varsolve",
        "--config",
        &cfg,
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    validate(&v);
    let trace = std::fs::read_to_string(&csv).unwrap();
    assert!(trace.starts_with("iteration,total,main_term,pen1,pen3,grad_norm,step"));
    assert_eq!(trace.lines().count() as u64, v["body"]["iterations"].as_u64().unwrap() + 2);

    let mtx = dir.path().join("d.mtx");
    let out = spencer(&["matrix", "--algebra", "A1", "--k", "1", "--lambda", "preset:cartan1", "--mtx", mtx.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&mtx).unwrap();
    assert!(text.starts_with("%%MatrixMarket"));
    assert!(text.lines().any(|l| l.split_whitespace().last().is_some_and(|t| t.contains('/'))));
}
