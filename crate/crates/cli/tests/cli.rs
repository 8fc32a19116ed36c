use std::path::Path;
use std::process::{Command, Output};

use fracvar::solver::SolveResult;
use fracvar::weak::{read_records, records_to_csv};
use fracvar::GridFunction;
use serde_json::Value;
use tempfile::TempDir;

fn fracvar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracvar"))
        .current_dir(dir)
        .env_remove("FRACVAR_OUT_DIR")
        .env("RUST_LOG", "off")
        .args(args)
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn write_constant_csv(dir: &Path, n: usize) {
    let u = GridFunction::constant(fracvar::GridShape::new(0.0, 1.0, n).unwrap(), 1.0).unwrap();
    u.save_csv(dir.join("u.csv")).unwrap();
}

#[test]
fn derivative_of_one() {
    let tmp = TempDir::new().unwrap();
    write_constant_csv(tmp.path(), 512);
    let out = fracvar(tmp.path(), &["deriv", "--alpha", "0.5", "--side", "left", "--input", "u.csv", "--out", "d"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = GridFunction::load_csv(tmp.path().join("d/derivative.csv")).unwrap();
    for k in 26..=486 {
        let exact = 1.0 / (std::f64::consts::PI * d.t(k)).sqrt();
        assert!((d.values()[k] - exact).abs() < 1e-2 * exact, "t = {}", d.t(k));
    }
}

#[test]
fn solve_is_deterministic_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let args = ["solve", "--lagrangian", "caputo-eigen", "--alpha", "0.5", "--n", "256", "--left", "1.0"];
    for dir in ["a", "b"] {
        let mut full = args.to_vec();
        full.extend(["--out", dir]);
        let out = fracvar(tmp.path(), &full);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["result.json", "solution.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
    let text = std::fs::read_to_string(tmp.path().join("a/result.json")).unwrap();
    let result = SolveResult::from_json(&text).unwrap();
    assert_eq!(result.to_json(), text);
    assert!(result.converged);
    assert!((result.u.last() - 5.00898).abs() < 0.02 * 5.00898);
    let csv = std::fs::read_to_string(tmp.path().join("a/solution.csv")).unwrap();
    assert_eq!(GridFunction::read_csv(csv.as_bytes()).unwrap().to_csv_string(), csv);
}

#[test]
fn theorem_check_writes_a_reloadable_study() {
    let tmp = TempDir::new().unwrap();
    let out = fracvar(
        tmp.path(),
        &["theorem-check", "--lagrangian", "example1-smoothed", "--alpha", "0.5", "--N", "0,2", "--n", "512", "--out", "th"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("th/convergence.csv")).unwrap();
    let records = read_records(csv.as_bytes()).unwrap();
    assert_eq!(records_to_csv(&records), csv);
    let max: Vec<f64> = records.iter().filter(|r| r.phi_id == "max").map(|r| r.weak_error).collect();
    assert_eq!(max.len(), 2);
    assert!(max[1] < max[0]);
}

#[test]
fn config_file_mirrors_flags() {
    let tmp = TempDir::new().unwrap();
    let config = r#"{"command": "prop-check", "f-poly": [1, -4, 6, -4, 1], "alpha": 0.5, "N": [2], "n": 256, "phi-degrees": [0, 1]}"#;
    std::fs::write(tmp.path().join("run.json"), config).unwrap();
    let from_file = fracvar(tmp.path(), &["--config", "run.json", "--out", "file"]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let from_flags = fracvar(
        tmp.path(),
        &["prop-check", "--f-poly", "1,-4,6,-4,1", "--alpha", "0.5", "--N", "2", "--n", "256", "--phi-degrees", "0,1", "--out", "flags"],
    );
    assert!(from_flags.status.success());
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("convergence.csv")).unwrap();
    assert_eq!(read("file"), read("flags"));

    // A flag overrides the file.
    let overridden = fracvar(tmp.path(), &["prop-check", "--config", "run.json", "--N", "0", "--out", "over"]);
    assert!(overridden.status.success());
    let csv = String::from_utf8(read("over")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("0,")));
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    write_constant_csv(tmp.path(), 64);
    let out = Command::new(env!("CARGO_BIN_EXE_fracvar"))
        .current_dir(tmp.path())
        .env("FRACVAR_OUT_DIR", "from-env")
        .args(["deriv", "--alpha", "0.25", "--input", "u.csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from-env/derivative.csv").exists());
}

#[test]
fn exit_codes_and_error_json() {
    let tmp = TempDir::new().unwrap();
    let cases: [(&[&str], i32, &str); 5] = [
        (&["solve", "--alpha", "0.5", "--n", "64", "--left", "1"], 2, "config"),
        (&["solve", "--lagrangian", "nope", "--alpha", "0.5", "--n", "64", "--left", "1"], 2, "config"),
        (&["deriv", "--alpha", "0.5", "--input", "missing.csv"], 2, "config"),
        (&["solve", "--lagrangian", "rl-eigen", "--alpha", "1.2", "--n", "64", "--left", "1"], 3, "domain"),
        (&["solve", "--lagrangian", "riesz-eigen", "--alpha", "0.5", "--n", "64", "--left", "1", "--window", "-0.5,0,1,1"], 3, "domain"),
    ];
    for (args, code, kind) in cases {
        let out = fracvar(tmp.path(), args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let err = error_json(&out);
        assert_eq!(err["error"]["code"], code);
        assert_eq!(err["error"]["kind"], kind);
    }
}

#[test]
fn non_convergence_still_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = fracvar(
        tmp.path(),
        &["solve", "--lagrangian", "caputo-eigen", "--alpha", "0.5", "--n", "128", "--left", "1", "--max-iter", "3", "--out", "nc"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"]["kind"], "non-convergence");
    let result = SolveResult::from_json(&std::fs::read_to_string(tmp.path().join("nc/result.json")).unwrap()).unwrap();
    assert!(!result.converged);
    assert_eq!(result.iterations, 3);
    assert!(tmp.path().join("nc/solution.csv").exists());
}
