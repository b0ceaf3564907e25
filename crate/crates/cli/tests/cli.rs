use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn rrkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrkit"))
        .args(args)
        .output()
        .expect("spawn rrkit")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn stderr_code(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).expect("JSON on stderr");
    v["code"].as_str().unwrap().to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn design_example_one() {
    let out = rrkit(&["design", "--survey", data("ex1.json").to_str().unwrap()]);
    let v = stdout_json(&out);
    assert!((f(&v["p0"]) - 0.1099).abs() < 5e-5);
    assert_eq!(v["mode"], "all_stigmatizing");
    assert_eq!(v["m"], 4);
    assert_eq!(v["t"], 0);
    assert!(v["c"].is_null());
    assert!(v["guarantee_statement"]
        .as_str()
        .unwrap()
        .contains("alpha <= 0.1"));
}

#[test]
fn design_example_two() {
    let v = stdout_json(&rrkit(&[
        "design",
        "--survey",
        data("ex2.json").to_str().unwrap(),
    ]));
    assert!((f(&v["p0"]) - 0.1639).abs() < 5e-5);
    assert_eq!(v["t"], 1);
    assert_eq!(f(&v["c"]), 0.15);
}

#[test]
fn design_rejects_xi_above_c() {
    let out = rrkit(&["design", "--survey", data("bad.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "XI_GE_C");
}

#[test]
fn missing_survey_file_is_io_error() {
    let out = rrkit(&["design", "--survey", "/nonexistent/survey.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_code(&out), "IO_ERROR");
}

#[test]
fn table_single_entry() {
    let out = rrkit(&["table", "--m", "2", "--xi", "0.2"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "m,0.2\n2,0.3846\n");
}

#[test]
fn table_json_format() {
    let v = stdout_json(&rrkit(&[
        "table", "--m", "3,4", "--xi", "0.1", "--format", "json",
    ]));
    assert_eq!(f(&v["p0"][0][0]), 0.1413);
    assert_eq!(f(&v["p0"][1][0]), 0.1099);
}

#[test]
fn table_rejects_empty_grid() {
    let out = rrkit(&["table", "--m", "", "--xi", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "EMPTY_GRID");
    let out = rrkit(&["table", "--m", "3", "--xi", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_binary() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.json");
    std::fs::write(&counts, "[40, 60]").unwrap();
    let v = stdout_json(&rrkit(&[
        "estimate",
        "--survey",
        data("binary.json").to_str().unwrap(),
        "--counts",
        counts.to_str().unwrap(),
    ]));
    assert!((f(&v["mu_hat"]) - 0.7).abs() < 1e-12);
    assert!((f(&v["var_mu_plugin"]) - 0.0096).abs() < 1e-15);
    assert_eq!(v["flags"].as_array().unwrap().len(), 0);
}

#[test]
fn estimate_flags_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.json");
    std::fs::write(&counts, r#"{"counts": [10, 90]}"#).unwrap();
    let v = stdout_json(&rrkit(&[
        "estimate",
        "--survey",
        data("binary.json").to_str().unwrap(),
        "--counts",
        counts.to_str().unwrap(),
    ]));
    assert!((f(&v["pi_hat_raw"][0]) + 0.3).abs() < 1e-12);
    assert!((f(&v["pi_hat_raw"][1]) - 1.3).abs() < 1e-12);
    assert_eq!(f(&v["pi_hat_truncated"][0]), 0.0);
    assert_eq!(f(&v["pi_hat_truncated"][1]), 1.0);
    assert_eq!(v["flags"][0], "RAW_OUT_OF_RANGE");
}

#[test]
fn estimate_rejects_wrong_length() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.json");
    std::fs::write(&counts, "[1, 2, 3]").unwrap();
    let out = rrkit(&[
        "estimate",
        "--survey",
        data("binary.json").to_str().unwrap(),
        "--counts",
        counts.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "DIMENSION_MISMATCH");
}

#[test]
fn privacy_alpha() {
    let v = stdout_json(&rrkit(&[
        "privacy",
        "--survey",
        data("binary.json").to_str().unwrap(),
    ]));
    assert!((f(&v["alpha"]) - 0.2625).abs() < 1e-12);
    assert!(v["beta"].is_null());
    assert!((f(&v["posterior"][0][0]) - 0.5625).abs() < 1e-12);
    assert!(f(&v["guaranteed_bound"]) >= f(&v["alpha"]));
}

#[test]
fn privacy_beta() {
    let v = stdout_json(&rrkit(&[
        "privacy",
        "--survey",
        data("ex2.json").to_str().unwrap(),
        "--p",
        "0.2",
    ]));
    assert!((f(&v["beta"]) - 0.408163).abs() < 1e-6);
    assert_eq!(v["beta_argmin"], serde_json::json!([1]));
    assert!(v["alpha"].is_null());
}

#[test]
fn privacy_degenerate_population() {
    let v = stdout_json(&rrkit(&[
        "privacy",
        "--survey",
        data("degenerate.json").to_str().unwrap(),
        "--p",
        "0.7",
    ]));
    assert_eq!(f(&v["alpha"]), 0.0);
}

#[test]
fn simulate_requires_pi() {
    let out = rrkit(&[
        "simulate",
        "--survey",
        data("no_pi.json").to_str().unwrap(),
        "--n",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "MISSING_PI");
}

#[test]
fn simulate_single_replicate() {
    let v = stdout_json(&rrkit(&[
        "simulate",
        "--survey",
        data("canonical.json").to_str().unwrap(),
        "--n",
        "50",
        "--replicates",
        "1",
    ]));
    assert!(v["empirical_var_mu_hat"].is_null());
    assert_eq!(v["replicates"], 1);
}

#[test]
fn simulate_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    let out = rrkit(&[
        "simulate",
        "--survey",
        data("canonical.json").to_str().unwrap(),
        "--n",
        "20",
        "--replicates",
        "5",
        "--records",
        records.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(records).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "replicate,mu_hat,pi_hat_raw_1,pi_hat_raw_2,pi_hat_raw_3"
    );
    assert_eq!(lines.len(), 6);
}

#[test]
fn verify_coarse_grid_passes() {
    let out = rrkit(&["verify", "--grid-step", "0.2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("posterior_vs_bayes"));
}

#[test]
fn verify_catches_injected_sign_flip() {
    let out = rrkit(&[
        "verify",
        "--grid-step",
        "0.25",
        "--inject",
        "printed-mean-variance",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_code(&out), "VERIFICATION_FAILED");
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("variance_mean_vs_multinomial"))
        .unwrap();
    assert!(line.ends_with("FAIL"));
}

#[test]
fn verify_rejects_bad_step() {
    let out = rrkit(&["verify", "--grid-step", "0.7"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "INVALID_GRID_STEP");
}
