use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qubus-sim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn perm(d: usize, f: impl Fn(usize) -> usize) -> Value {
    let rows: Vec<Value> = (0..d)
        .map(|i| Value::Array((0..d).map(|j| json!([if f(j) == i { 1.0 } else { 0.0 }, 0.0])).collect()))
        .collect();
    Value::Array(rows)
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn unitary(dir: &Path, name: &str, n: usize, f: impl Fn(usize) -> usize) -> String {
    write(dir, name, &json!({ "n": n, "matrix": perm(1 << n, f) }))
        .to_string_lossy()
        .into_owned()
}

fn cnot(j: usize) -> usize {
    if j >= 2 { j ^ 1 } else { j }
}

fn swap(j: usize) -> usize {
    [0, 2, 1, 3][j]
}

#[test]
fn compile_cnot_reports_nine_xpm_and_config() {
    let d = TempDir::new().unwrap();
    let u = unitary(d.path(), "cnot.json", 2, cnot);
    let v = ok_json(&["compile", &u]);
    assert_eq!(v["tally"]["xpm"], 9);
    assert_eq!(v["config"]["theta"], 0.1);
    assert_eq!(v["config"]["eta"], 1.0);
    assert_eq!(v["config"]["variant"], "simplified");
    assert!(v["version"].as_str().unwrap().starts_with("qubus-sim "));
    // |beta|^2 = 2 alpha^2 sin^2(theta/2) = 60
    let a = v["config"]["alpha"].as_f64().unwrap();
    assert!((2.0 * a * a * 0.05f64.sin().powi(2) - 60.0).abs() < 1e-9);
}

#[test]
fn identity_compiles_to_an_empty_program() {
    let d = TempDir::new().unwrap();
    let u = unitary(d.path(), "id.json", 2, |j| j);
    let v = ok_json(&["compile", &u]);
    assert_eq!(v["program"]["instructions"], json!([]));
    assert_eq!(v["tally"]["xpm"], 0);
}

#[test]
fn verify_against_target_and_negative_control() {
    let d = TempDir::new().unwrap();
    let u = unitary(d.path(), "cnot.json", 2, cnot);
    let s = unitary(d.path(), "swap.json", 2, swap);
    let prog = d.path().join("prog.json");
    let out = run(&["compile", &u, "--out", prog.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let v = ok_json(&["verify", prog.to_str().unwrap(), &u]);
    assert!(v["report"]["min_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    let v = ok_json(&["verify", prog.to_str().unwrap(), &s]);
    assert!(v["report"]["process_fidelity"].as_f64().unwrap() < 0.9);
}

#[test]
fn composite_gate_specs_compile() {
    let d = TempDir::new().unwrap();
    let x = json!([[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]);
    let spec = write(d.path(), "toffoli.json", &json!({ "n": 3, "structure": "special", "m": 2, "blocks": [x] }));
    let v = ok_json(&["compile", spec.to_str().unwrap()]);
    assert_eq!(v["tally"]["xpm"], 6);
    let target = unitary(d.path(), "t.json", 3, |j| if j >= 6 { j ^ 1 } else { j });
    let prog = d.path().join("p.json");
    fs::write(&prog, serde_json::to_string(&v).unwrap()).unwrap();
    let r = ok_json(&["verify", prog.to_str().unwrap(), &target]);
    assert!(r["report"]["min_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
}

#[test]
fn validation_errors_exit_two() {
    let d = TempDir::new().unwrap();
    let mut m = perm(4, |j| j);
    m[0][0] = json!([1.001, 0.0]);
    let bad = write(d.path(), "bad.json", &json!({ "n": 2, "matrix": m }));
    let out = run(&["compile", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residual"));

    let mal = d.path().join("mal.json");
    fs::write(&mal, "{\"n\": 2, \"matrix\": [").unwrap();
    assert_eq!(run(&["compile", mal.to_str().unwrap()]).status.code(), Some(2));

    let wrong_n = write(d.path(), "n.json", &json!({ "n": 3, "matrix": perm(4, |j| j) }));
    assert_eq!(run(&["compile", wrong_n.to_str().unwrap()]).status.code(), Some(2));

    let u = unitary(d.path(), "cnot.json", 2, cnot);
    let three = unitary(d.path(), "three.json", 3, |j| j);
    let prog = d.path().join("prog.json");
    run(&["compile", &u, "--out", prog.to_str().unwrap()]);
    assert_eq!(run(&["verify", prog.to_str().unwrap(), &three]).status.code(), Some(2));

    assert_eq!(run(&["resources", "--approach", "cpm3"]).status.code(), Some(2));
    assert_eq!(run(&["detector-stats", "--eta", "0"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_three() {
    let d = TempDir::new().unwrap();
    let u = unitary(d.path(), "cnot.json", 2, cnot);
    let prog = d.path().join("prog.json");
    run(&["compile", &u, "--out", prog.to_str().unwrap()]);
    let out = run(&["verify", prog.to_str().unwrap(), &u, "--node-budget", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn resources_table_covers_all_rows() {
    let v = ok_json(&["resources"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4 * 7);
    assert_eq!(v["all_checks_pass"], true);
    for r in rows {
        if r["approach"] == "cpm1" || r["approach"] == "cpm2" {
            let checks = r["checks"].as_array().unwrap();
            assert!(!checks.is_empty());
            assert!(checks.iter().all(|c| c["equal"] == true));
        }
    }
    let v = ok_json(&["resources", "--n-min", "1", "--n-max", "1", "--approach", "cpm1"]);
    assert_eq!(v["rows"][0]["lean_xpm"]["xpm"], "0");
}

#[test]
fn detector_stats_peaks_and_error_table() {
    let v = ok_json(&["detector-stats"]);
    assert_eq!(v["config"]["theta"], 0.01);
    assert_eq!(v["config"]["alpha"], 1000.0);
    let means: Vec<f64> = v["peaks"].as_array().unwrap().iter().map(|p| p["mean"].as_f64().unwrap()).collect();
    // gamma^2 * 2 sin^2(k theta / 2)
    for (k, m) in means.iter().enumerate() {
        let want = 1e6 * 2.0 * (k as f64 * 0.005).sin().powi(2);
        assert!((m - want).abs() <= 1e-9 * want.max(1.0), "k={k}: {m} vs {want}");
    }
    assert!((means[1] - 50.0).abs() < 0.01 && (means[4] - 800.0).abs() < 0.2);
    let pe = v["pe"].as_array().unwrap();
    assert_eq!(pe.iter().map(|r| r["recycled"].as_u64().unwrap()).collect::<Vec<_>>(), [0, 10000]);
    assert!(pe.iter().all(|r| r["below_bound"] == true));
    assert!((pe[1]["alpha_eff"].as_f64().unwrap() - 606.5).abs() < 0.1);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let d = TempDir::new().unwrap();
    let u = unitary(d.path(), "cnot.json", 2, cnot);
    for args in [
        vec!["compile", u.as_str()],
        vec!["simulate", u.as_str(), "--seed", "9", "--basis", "3"],
        vec!["detector-stats"],
        vec!["resources"],
    ] {
        let a = run(&args);
        let b = run(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn simulate_demo_lands_on_the_ideal_output() {
    let d = TempDir::new().unwrap();
    let u = unitary(d.path(), "cnot.json", 2, cnot);
    for seed in ["1", "2", "3"] {
        let v = ok_json(&["simulate", &u, "--seed", seed, "--basis", "2"]);
        assert_eq!(v["config"]["seed"], seed.parse::<u64>().unwrap());
        assert!(v["fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    }
}

#[test]
fn thread_cap_is_read_from_the_environment() {
    let d = TempDir::new().unwrap();
    let u = unitary(d.path(), "cnot.json", 2, cnot);
    let prog = d.path().join("prog.json");
    run(&["compile", &u, "--out", prog.to_str().unwrap()]);
    let out = bin().args(["verify", prog.to_str().unwrap(), &u]).env("QUBUS_SIM_THREADS", "1").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = bin().args(["verify", prog.to_str().unwrap(), &u]).env("QUBUS_SIM_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
