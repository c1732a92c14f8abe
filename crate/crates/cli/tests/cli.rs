use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

use momap::adhm::{adhm_residuals, parse_adhm};
use momap::moment::{king_residual, KahlerData};
use momap::quiver::parse_quiver_spec;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn momap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    momap(args).status.code().expect("exit code")
}

fn run_to_file(args: &[&str], dir: &Path, name: &str) -> (i32, Value, Value) {
    let out = dir.join(name);
    let mut all: Vec<&str> = args.to_vec();
    let out_str = out.to_str().unwrap().to_string();
    all.extend(["--out", &out_str]);
    let status = code(&all);
    let result = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let manifest_file = format!("{out_str}.manifest.json");
    let manifest = serde_json::from_str(&fs::read_to_string(manifest_file).unwrap()).unwrap();
    (status, result, manifest)
}

#[test]
fn king_solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let normal = data("normal.json");
    let (status, result, manifest) = run_to_file(&["king", "solve", normal.to_str().unwrap()], dir.path(), "n.json");
    assert_eq!(status, 0);
    assert_eq!(result["status"], "Converged");
    assert_eq!(manifest["status"], "Converged");
    let bytes = fs::read(&normal).unwrap();
    assert_eq!(manifest["input_sha256"], hex::encode(Sha256::digest(&bytes)));

    let jordan = data("jordan.json");
    let (status, result, _) = run_to_file(&["king", "solve", jordan.to_str().unwrap()], dir.path(), "j.json");
    assert_eq!(status, 2);
    assert_eq!(result["certificate"]["subdims"]["v"], 1);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&["king", "solve", bad.to_str().unwrap()]), 1);
    assert_eq!(code(&["king", "solve", "/nonexistent/input.json"]), 1);
}

#[test]
fn king_solution_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    let input = data("triangular.json");
    let (status, result, _) = run_to_file(&["king", "solve", input.to_str().unwrap()], dir.path(), "t.json");
    assert_eq!(status, 0);
    assert!((result["final_functional"].as_f64().unwrap() - 5.0).abs() < 1e-6);

    // Feed the metric back in as part of the problem and re-evaluate.
    let mut spec: Value = serde_json::from_str(&fs::read_to_string(&input).unwrap()).unwrap();
    spec["metric"] = result["metric"].clone();
    let p = parse_quiver_spec(&spec.to_string()).unwrap();
    let h = momap::moment::HermitianMetricFamily::new(&p.dims, p.metric.clone().unwrap()).unwrap();
    let res = king_residual(p.rep.as_ref().unwrap(), &h, &p.eta, &KahlerData::uniform(&p.quiver)).unwrap();
    assert!(res.sup_norm < 1e-9);
}

#[test]
fn history_csv_has_the_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let input = data("triangular.json");
    let out = momap(&["king", "solve", input.to_str().unwrap(), "--history", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,functional,residual"));
    let iterations: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(iterations.len() > 1);
    assert!(iterations.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn results_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let s = code(&["adhm", "solve", "--n", "2", "--k", "2", "--eta", "0.5", "--seed", "9", "--out", out.to_str().unwrap()]);
        assert_eq!(s, 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn verify_universal() {
    let input = data("three_vertex.json");
    assert_eq!(code(&["king", "verify-universal", input.to_str().unwrap(), "--samples", "100"]), 0);
    let rank_one = data("rank_one.json");
    let out = momap(&["king", "verify-universal", rank_one.to_str().unwrap(), "--samples", "10"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["max_deviation"].as_f64().unwrap() < 1e-12);
    assert_eq!(code(&["king", "verify-universal", input.to_str().unwrap(), "--samples", "0"]), 1);
}

#[test]
fn adhm_solve() {
    let dir = tempfile::tempdir().unwrap();
    let (status, result, _) = run_to_file(&["adhm", "solve", "--n", "1", "--k", "1", "--eta", "1"], dir.path(), "a.json");
    assert_eq!(status, 0);
    let (d, eta) = parse_adhm(&result.to_string()).unwrap();
    assert!((d.b[(0, 0)].norm() - 1.0).abs() < 1e-8);
    assert!(adhm_residuals(&d, eta).unwrap().sup_norm() < 1e-9);

    let (status, result, _) = run_to_file(
        &["adhm", "solve", "--n", "2", "--k", "1", "--eta", "1", "--flip-eta"],
        dir.path(),
        "f.json",
    );
    assert_eq!(status, 0);
    assert_eq!(result["eta"], -1.0);
    assert_eq!(code(&["adhm", "solve", "--n", "2", "--k", "1", "--eta", "0"]), 1);
}

#[test]
fn nekrasov_solve() {
    let dir = tempfile::tempdir().unwrap();
    let input = data("bargmann.json");
    let (status, result, _) = run_to_file(&["nekrasov", "solve", input.to_str().unwrap()], dir.path(), "b.json");
    assert_eq!(status, 0);
    let weights = result["weights"].as_array().unwrap();
    let mut factorial = 1.0;
    for (k, w) in weights.iter().enumerate() {
        if k > 0 {
            factorial *= k as f64;
        }
        assert!((w["c"].as_f64().unwrap() / factorial - 1.0).abs() < 1e-12);
    }
    let input = data("principal_ideal.json");
    assert_eq!(code(&["nekrasov", "solve", input.to_str().unwrap()]), 0);
    let input = data("low_cap.json");
    assert_eq!(code(&["nekrasov", "solve", input.to_str().unwrap()]), 1);
}

#[test]
fn fock_check_state() {
    assert_eq!(code(&["fock", "check-state", "--n", "2", "--degree", "6", "--rho", "1.5", "--hbar", "0.5"]), 0);
    assert_eq!(code(&["fock", "check-state", "--n", "1", "--degree", "0", "--rho", "1", "--hbar", "1"]), 0);
    assert_eq!(code(&["fock", "check-state", "--n", "1", "--degree", "11", "--rho", "1", "--hbar", "1"]), 1);
}
