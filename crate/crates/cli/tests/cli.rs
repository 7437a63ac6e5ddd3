//! End-to-end runs of the `prodtail` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const REFERENCE: &str = r#"{"mu":[1.0,0.7,-0.4,1.3],"sigma":[1.0,1.2,1.5,0.9]}"#;
const PAIR: &str = r#"{"mu":[1.0,0.5],"sigma":[1.0,1.0]}"#;
const ZERO: &str = r#"{"mu":[0.0,0.0],"sigma":[1.0,2.0]}"#;

fn prodtail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prodtail"))
        .args(args)
        .output()
        .unwrap()
}

fn model_file(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn field(csv: &str, key: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no field {key} in\n{csv}"))
        .to_string()
}

#[test]
fn approx_reference_model() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "ref.json", REFERENCE);
    let out = prodtail(&["approx", "--model", s(&m), "--x", "1e6"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("field,value\n"));
    let r: f64 = field(&csv, "r").parse().unwrap();
    let l_star: f64 = field(&csv, "l_star").parse().unwrap();
    assert!((r - 28.029_880_508_457).abs() < 1e-9, "{r}");
    assert!((l_star - 2.761_111_111_111_111).abs() < 1e-14);
    assert_eq!(field(&csv, "m_star"), "1");
    assert_eq!(field(&csv, "p"), "underflow");
    assert_eq!(field(&csv, "method"), "theorem1");
}

#[test]
fn approx_json_matches_csv() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "ref.json", REFERENCE);
    let csv = String::from_utf8(prodtail(&["approx", "--model", s(&m), "--x", "1e6"]).stdout).unwrap();
    let out = prodtail(&["approx", "--model", s(&m), "--x", "1e6", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let from_json = doc["estimate"]["log_p"].as_f64().unwrap();
    let from_csv: f64 = field(&csv, "log_p").parse().unwrap();
    assert_eq!(from_json, from_csv);
    assert!(doc["estimate"]["p"].is_null());
    assert_eq!(doc["breakdown"]["m_star"]["count"], 1);
}

#[test]
fn saddle_sum_tier() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "zero.json", ZERO);
    let out = prodtail(&["approx", "--model", s(&m), "--x", "30", "--tier", "saddle_sum"]);
    assert!(out.status.success());
    let log_p: f64 = field(&String::from_utf8(out.stdout).unwrap(), "log_p").parse().unwrap();
    // Exact value -17.3115119437...; the saddle sum is 3.9% high here.
    assert!((log_p - -17.311_511_943_717).abs() < 0.05, "{log_p}");
}

#[test]
fn all_means_zero_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "zero.json", ZERO);
    let out = prodtail(&["approx", "--model", s(&m), "--x", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[all-means-zero]:"), "{err}");

    let out = prodtail(&["approx", "--model", s(&m), "--x", "10", "--format", "json"]);
    assert_eq!(out.status.code(), Some(3));
    let doc: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(doc["error"], "all-means-zero");
}

#[test]
fn oracle_matches_reference_value() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "pair.json", PAIR);
    let out = prodtail(&["oracle", "--model", s(&m), "--x", "10"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let log_p: f64 = field(&csv, "log_p").parse().unwrap();
    assert!((log_p - -8.365_997_901_751_039).abs() < 1e-9);
    assert_eq!(field(&csv, "method"), "quadrature");
    let acc: f64 = field(&csv, "rel_accuracy").parse().unwrap();
    assert!(acc < 1e-8);
}

#[test]
fn oracle_rejects_large_models() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "five.json", r#"{"mu":[1,1,1,1,1],"sigma":[1,1,1,1,1]}"#);
    let out = prodtail(&["oracle", "--model", s(&m), "--x", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("n-too-large-for-quadrature"));
}

#[test]
fn monte_carlo_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "pair.json", PAIR);
    let args = [
        "mc",
        "--model",
        s(&m),
        "--x",
        "5",
        "--samples",
        "100000",
        "--seed",
        "17",
    ];
    let a = prodtail(&args);
    let b = prodtail(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let csv = String::from_utf8(a.stdout).unwrap();
    assert_eq!(field(&csv, "seed"), "17");
    assert_eq!(field(&csv, "n_samples"), "100000");

    let tilted = prodtail(&[
        "mc",
        "--model",
        s(&m),
        "--x",
        "5",
        "--samples",
        "100000",
        "--seed",
        "17",
        "--proposal",
        "saddle_tilt",
    ]);
    assert!(tilted.status.success());
    assert_eq!(
        field(&String::from_utf8(tilted.stdout).unwrap(), "method"),
        "mc_importance"
    );
}

#[test]
fn plain_monte_carlo_misses_deep_tail() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "ref.json", REFERENCE);
    let out = prodtail(&["mc", "--model", s(&m), "--x", "1e6", "--samples", "10000"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error[degenerate-variance]"));
}

#[test]
fn sweep_writes_identical_files() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "pair.json", PAIR);
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = prodtail(&[
            "sweep",
            "--model",
            s(&m),
            "--x-min",
            "10",
            "--x-max",
            "1000",
            "--points",
            "3",
            "--samples",
            "20000",
            "--out",
            s(&path),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));

    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("# model: "));
    assert_eq!(lines[1], "# seed: 20240601");
    assert!(lines[2].starts_with("# config: "));
    assert_eq!(
        lines[3],
        "x,r,log10_theorem1,log10_saddle_sum,log10_oracle,oracle_method,mc_stderr_rel,rel_err_theorem1,rel_err_saddle_sum"
    );
    let xs: Vec<&str> = lines[4..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        xs,
        ["1.0000000000000000e1", "1.0000000000000000e2", "1.0000000000000000e3"]
    );
    for row in &lines[4..] {
        assert_eq!(row.split(',').count(), 9);
    }
    assert!(lines[4].contains(",quadrature,"));
    assert!(lines[6].contains(",mc_importance,"));
}

#[test]
fn sweep_leaves_missing_tiers_empty() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "pair.json", PAIR);
    let out = prodtail(&[
        "sweep",
        "--model",
        s(&m),
        "--x-min",
        "10",
        "--x-max",
        "100",
        "--points",
        "2",
        "--tier",
        "theorem1",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!(row["log10_theorem1"].is_f64());
        assert!(row["log10_saddle_sum"].is_null());
        assert!(row["log10_oracle"].is_null());
    }
}

#[test]
fn signopt_linear_and_brute_agree() {
    let dir = TempDir::new().unwrap();
    let m = model_file(&dir, "ref.json", REFERENCE);
    let linear = String::from_utf8(prodtail(&["signopt", "--model", s(&m)]).stdout).unwrap();
    let brute = String::from_utf8(prodtail(&["signopt", "--model", s(&m), "--brute"]).stdout).unwrap();
    assert_eq!(field(&linear, "l_star"), field(&brute, "l_star"));
    assert_eq!(field(&linear, "m_star"), "1");
    assert_eq!(field(&brute, "witnesses"), "++++");
}

#[test]
fn usage_and_input_errors() {
    assert_eq!(prodtail(&["validate", "--scope", "bogus"]).status.code(), Some(2));
    assert_eq!(prodtail(&["approx", "--x", "10"]).status.code(), Some(2));
    let out = prodtail(&["approx", "--model", "/nonexistent/model.json", "--x", "10"]);
    assert_eq!(out.status.code(), Some(3));

    let dir = TempDir::new().unwrap();
    let bad = model_file(&dir, "bad.json", r#"{"mu":[1.0],"sigma":[-1.0]}"#);
    let out = prodtail(&["approx", "--model", s(&bad), "--x", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error[non-positive-sigma]"));
}
