use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jmsteer::measurements::MeasurementSet;
use jmsteer::steering::Assemblage;
use serde_json::Value;
use tempfile::TempDir;

fn jmsteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jmsteer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn payload(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, out: &Output) -> String {
    let path = dir.path().join(name);
    fs::write(&path, &out.stdout).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn jm_check_smeared_pauli_pair() {
    let out = jmsteer(&["jm", "check", "--stdlib", "pauli_xz", "--eta", "0.70"]);
    assert_eq!(code(&out), 0);
    let v = payload(&out);
    assert_eq!(v["verdict"], "jointly_measurable");
    assert_eq!(v["certificate_digest"].as_str().unwrap().len(), 64);
    assert_eq!(v["certificate"]["status"], "feasible");

    let out = jmsteer(&["jm", "check", "--stdlib", "pauli_xz", "--eta", "0.72"]);
    assert_eq!(code(&out), 1);
    assert_eq!(payload(&out)["verdict"], "not_jointly_measurable");
    assert_eq!(payload(&out)["certificate"]["status"], "infeasible");
}

#[test]
fn ft_eval_orthogonal_axes() {
    let out = jmsteer(&["ft", "eval", "--x1", "0.6,0,0", "--x2", "0,0.6,0", "--x3", "0,0,0.6"]);
    assert_eq!(code(&out), 0);
    let v = payload(&out);
    assert_eq!(v["verdict"], "steerable");
    let value = v["value"].as_f64().unwrap();
    assert!((value - 2.4 * 3f64.sqrt()).abs() < 1e-10, "{value}");

    let out = jmsteer(&["ft", "eval", "--x1", "-0.5,0,0", "--x2", "0,0.5,0", "--x3", "0,0,0.5"]);
    assert_eq!(code(&out), 1);
    assert_eq!(payload(&out)["verdict"], "unsteerable");
}

#[test]
fn threshold_for_qubits() {
    let out = jmsteer(&["bridge", "threshold", "--d", "2"]);
    assert_eq!(code(&out), 0);
    assert_eq!(payload(&out)["lambda_star"].as_f64(), Some(0.5));
    assert_eq!(code(&jmsteer(&["bridge", "threshold", "--d", "1"])), 2);
}

#[test]
fn schema_violations_point_at_the_entry() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"dim": 2, "povms": [[[[[0.5,0],[0,0]],[[0,0],[0.5,0]]], [[[0.5,0],[0,0]],[[0,0],["x",0]]]]]}"#,
    )
    .unwrap();
    let out = jmsteer(&["jm", "check", "-i", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let v = payload(&out);
    assert_eq!(v["error"]["kind"], "input_error");
    assert_eq!(v["error"]["path"], "povms[0][1][1][1][0]");
    assert!(!out.stderr.is_empty());

    // effects not summing to the identity
    fs::write(&path, r#"{"dim": 1, "povms": [[[[[0.4,0]]], [[[0.4,0]]]]]}"#).unwrap();
    let out = jmsteer(&["jm", "check", "-i", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(payload(&out)["error"]["path"], "povms[0]");

    for args in [
        vec!["jm", "check", "--stdlib", "nope"],
        vec!["jm", "check", "-i", "/nonexistent/file.json"],
        vec!["jm", "check"],
        vec!["lhv", "decompose", "--s", "0.5"],
        vec!["lhv", "decompose", "--s", "0.8", "--classes", "sym_ext_B"],
        vec!["lhv", "scan", "--s-grid", "0.8", "--ua-grid", "2x2"],
        vec!["ft", "eval", "--x1", "1,1,1", "--x2", "0,0,0", "--x3", "0,0,0"],
        vec!["bogus"],
    ] {
        let out = jmsteer(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert_eq!(payload(&out)["error"]["kind"], "input_error", "{args:?}");
    }
}

#[test]
fn solver_failure_exits_with_three() {
    let out = jmsteer(&["--max-iter", "1", "jm", "check", "--stdlib", "pauli_xyz", "--eta", "0.58"]);
    assert_eq!(code(&out), 3);
    assert_eq!(payload(&out)["error"]["kind"], "numerical_failure");
}

#[test]
fn emitted_json_is_read_back() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "set.json", &jmsteer(&["stdlib", "coexistence_c3_pair"]));
    MeasurementSet::from_json(&serde_json::from_str(&fs::read_to_string(&set).unwrap()).unwrap()).unwrap();

    let asm_out = jmsteer(&["bridge", "to-assemblage", "-i", &set]);
    assert_eq!(code(&asm_out), 0);
    let asm = write(&dir, "asm.json", &asm_out);
    Assemblage::from_json(&payload(&asm_out)).unwrap();
    assert_eq!(code(&jmsteer(&["steer", "check", "-i", &asm])), 0);

    let back_out = jmsteer(&["bridge", "to-measurements", "-i", &asm]);
    assert_eq!(code(&back_out), 0);
    let back = MeasurementSet::from_json(&payload(&back_out)).unwrap();
    let orig = MeasurementSet::from_json(&serde_json::from_str(&fs::read_to_string(&set).unwrap()).unwrap()).unwrap();
    for k in 0..2 {
        for x in 0..orig.povm(k).outcomes() {
            assert!(back.effect(k, x).max_abs_diff(orig.effect(k, x)) < 1e-10);
        }
    }

    let xyz = write(&dir, "xyz.json", &jmsteer(&["stdlib", "pauli_xyz"]));
    let parent_out = jmsteer(&["jm", "parent", "-i", &xyz, "--lambda", "0.5"]);
    assert_eq!(code(&parent_out), 0);
    let parent = MeasurementSet::from_json(&payload(&parent_out)["parent"]).unwrap();
    assert_eq!(parent.povm(0).outcomes(), 8);
    let parent_path = dir.path().join("parent.json");
    fs::write(&parent_path, payload(&parent_out)["parent"].to_string()).unwrap();
    assert_eq!(code(&jmsteer(&["jm", "check", "-i", parent_path.to_str().unwrap()])), 0);
    assert_eq!(code(&jmsteer(&["jm", "parent", "-i", &xyz, "--lambda", "0.7"])), 1);
}

#[test]
fn steer_and_robustness_commands() {
    let out = jmsteer(&["steer", "check", "--stdlib", "pauli_xz"]);
    assert_eq!(code(&out), 0);
    assert_eq!(payload(&out)["verdict"], "steerable");
    let out = jmsteer(&["steer", "check", "--stdlib", "pauli_xz", "--eta", "0.6"]);
    assert_eq!(code(&out), 1);
    assert_eq!(payload(&out)["verdict"], "unsteerable");

    let jm = payload(&jmsteer(&["jm", "robustness", "--stdlib", "pauli_xyz"]));
    let st = payload(&jmsteer(&["steer", "robustness", "--stdlib", "pauli_xyz"]));
    let (a, b) = (jm["lambda"].as_f64().unwrap(), st["lambda"].as_f64().unwrap());
    assert!((a - 1.0 / 3f64.sqrt()).abs() < 1e-7 && (a - b).abs() < 1e-7, "{a} {b}");
    assert_eq!(jm["method"], "direct");
    let bis = payload(&jmsteer(&["jm", "robustness", "--stdlib", "pauli_xyz", "--bisection", "1e-6"]));
    assert_eq!(bis["method"], "bisection");
    assert!((bis["lambda"].as_f64().unwrap() - a).abs() < 2e-6);
}

#[test]
fn duality_check_on_default_state() {
    let out = jmsteer(&["bridge", "duality-check", "--stdlib", "pauli_xyz", "--lambda", "0.4"]);
    assert_eq!(code(&out), 0);
    let v = payload(&out);
    assert_eq!(v["consistent"], true);
    assert!(v["max_discrepancy"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn lhv_decompose_verdicts() {
    let out = jmsteer(&["lhv", "decompose", "--s", "0.7071067811865476", "--lambda", "0.6", "--classes", "noisy_bell"]);
    assert_eq!(code(&out), 0);
    let v = payload(&out);
    assert_eq!(v["status"], "found");
    let total: f64 = v["components"].as_array().unwrap().iter().map(|c| c["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let out = jmsteer(&["lhv", "decompose", "--s", "0.8", "--lambda", "0.9"]);
    assert_eq!(code(&out), 1);
    assert_eq!(payload(&out)["status"], "infeasible");

    let out = jmsteer(&["lhv", "decompose", "--s", "0.8"]);
    assert_eq!(code(&out), 0);
    let l = payload(&out)["lambda_max"].as_f64().unwrap();
    assert!((0.59..0.61).contains(&l), "{l}");
}

fn scan(dir: &TempDir, name: &str, extra: &[&str]) -> (Vec<u8>, String) {
    let csv = dir.path().join(name);
    let mut args = vec![
        "lhv",
        "scan",
        "--s-grid",
        "0.75,0.85",
        "--ua-grid",
        "2x2x2",
        "--ua-random",
        "3",
        "--csv",
        csv.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let out = jmsteer(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (out.stdout, fs::read_to_string(Path::new(&csv)).unwrap())
}

#[test]
fn scan_is_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    let (j1, c1) = scan(&dir, "a.csv", &["--seed", "5", "--jobs", "1"]);
    let (j2, c2) = scan(&dir, "b.csv", &["--seed", "5", "--jobs", "3"]);
    assert_eq!(j1, j2);
    assert_eq!(c1, c2);
    let (j3, _) = scan(&dir, "c.csv", &["--seed", "6"]);
    assert_ne!(j1, j3, "seed must reach the random U_A samples");

    let mut lines = c1.lines();
    assert_eq!(lines.next(), Some("s,lambda_max,ua_alpha,ua_beta,ua_gamma,classes"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.len(), 6);
        assert_eq!(r[5], "noisy_bell+sym_ext_A_2");
    }
    let l: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(l[1] < l[0], "{l:?}");

    let v: Value = serde_json::from_slice(&j1).unwrap();
    assert_eq!(v["ua_samples"], 11);
    assert!(v["sampling"].as_str().unwrap().contains("seed 5"));
}

#[test]
fn numbers_carry_twelve_significant_digits() {
    let v = payload(&jmsteer(&["bridge", "threshold", "--d", "3"]));
    assert_eq!(v["lambda_star"].as_f64(), Some(0.416666666667));
    assert_eq!(v["harmonic"].as_f64(), Some(1.83333333333));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let a = jmsteer(&["jm", "check", "--stdlib", "pauli_xyz", "--eta", "0.5"]);
    let b = jmsteer(&["jm", "check", "--stdlib", "pauli_xyz", "--eta", "0.5"]);
    assert_eq!(a.stdout, b.stdout);
}
