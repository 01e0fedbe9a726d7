use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tabletop::matrixkit::ComplexMatrix;
use tabletop::random;

fn tabletop(args: &[&str], env_policy: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tabletop"));
    cmd.args(args).env_remove("TABLETOP_POLICY");
    if let Some(p) = env_policy {
        cmd.env("TABLETOP_POLICY", p);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn rows(m: &ComplexMatrix) -> Value {
    let v: Vec<Vec<[f64; 2]>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    json!(v)
}

fn emitted(name: &str) -> Value {
    let out = tabletop(&["example", name, "--emit-spec"], None);
    assert_eq!(code(&out), 0);
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn examples_run_and_emitted_specs_check_exact() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["unital", "cx", "xx", "thermal"] {
        assert_eq!(code(&tabletop(&["example", name], None)), 0, "{name}");
        let p = write(&dir, &format!("{name}.json"), &emitted(name));
        let out = tabletop(&["check-exact", s(&p)], None);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["tool"], "tabletop");
    }
}

#[test]
fn random_instance_is_not_reversible() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = random::rng(7);
    let u = random::haar_unitary(&mut r, 4);
    let xi = random::density(&mut r, 2, 0.05);
    let gamma = random::density(&mut r, 2, 0.05);
    let spec = json!({"dim_s": 2, "dim_e": 2, "unitary": rows(&u), "xi": rows(&xi), "gamma": rows(&gamma)});
    let p = write(&dir, "random.json", &spec);
    assert_eq!(code(&tabletop(&["check-exact", s(&p)], None)), 1);
}

#[test]
fn malformed_specs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = emitted("cx");
    spec["xi"] = json!([[[0.5, 0.0], [0.0, 0.0]], [[0.5, 0.0]]]);
    let p = write(&dir, "ragged.json", &spec);
    let out = tabletop(&["check-exact", s(&p)], None);
    assert_eq!(code(&out), 64);
    assert!(!out.stderr.is_empty());

    let mut spec = emitted("cx");
    spec["colour"] = json!("blue");
    let p = write(&dir, "unknown.json", &spec);
    assert_eq!(code(&tabletop(&["check-exact", s(&p)], None)), 64);

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&tabletop(&["check-exact", s(&missing)], None)), 66);
}

#[test]
fn argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "xx.json", &emitted("xx-hamiltonian"));
    assert_eq!(code(&tabletop(&["approx", s(&p), "--points", "3"], None)), 65);
    assert_eq!(code(&tabletop(&["approx", s(&p), "--order", "3"], None)), 64);
    assert_eq!(code(&tabletop(&["approx", s(&p)], None)), 0);
    assert_eq!(code(&tabletop(&["no-such-command"], None)), 64);
    assert_eq!(code(&tabletop(&["--help"], None)), 0);
}

#[test]
fn pure_ancilla_collision_reports_rank_loss() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = emitted("thermal-collision");
    spec["xi"] = json!([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]);
    let p = write(&dir, "pure.json", &spec);
    let out = tabletop(&["collision", s(&p), "--T", "200", "--N", "2"], None);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "corollary.json", &emitted("corollary"));
    let args = ["collision", s(&p), "--N", "4,8,16", "--xi-policy", "solve", "--sampler", "exponential", "--seed", "3"];
    let a = tabletop(&args, None);
    let b = tabletop(&args, None);
    assert_eq!(code(&a), code(&b));
    assert_eq!(a.stdout, b.stdout);
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    tabletop(&[&args[..], &["--csv", s(&pa)]].concat(), None);
    tabletop(&[&args[..], &["--csv", s(&pb)]].concat(), None);
    let (ca, cb) = (std::fs::read_to_string(&pa).unwrap(), std::fs::read_to_string(&pb).unwrap());
    assert_eq!(ca, cb);
    assert!(ca.starts_with("n_steps,step,dt"), "{ca}");
}

#[test]
fn policy_comes_from_environment_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(&dir, "cx.json", &emitted("cx"));
    let env_pol = write(&dir, "env.json", &json!({"equality_tol": 1e-7}));
    let flag_pol = write(&dir, "flag.json", &json!({"equality_tol": 1e-5}));
    let tol = |out: &Output| -> f64 {
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["policy"]["equality_tol"].as_f64().unwrap()
    };
    assert_eq!(tol(&tabletop(&["check-exact", s(&spec)], None)), 1e-9);
    assert_eq!(tol(&tabletop(&["check-exact", s(&spec)], Some(&env_pol))), 1e-7);
    assert_eq!(tol(&tabletop(&["check-exact", s(&spec), "--policy", s(&flag_pol)], Some(&env_pol))), 1e-5);
    let bad = write(&dir, "bad.json", &json!({"equality_tol": -1.0}));
    assert_eq!(code(&tabletop(&["check-exact", s(&spec), "--policy", s(&bad)], None)), 65);
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(&dir, "cx.json", &emitted("cx"));
    let target = dir.path().join("report.json");
    let out = tabletop(&["check-exact", s(&spec), "--out", s(&target)], None);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!(v["wall_time_s"].is_null());
    let timed = tabletop(&["check-exact", s(&spec), "--timing"], None);
    let v: Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
    let unwritable = dir.path().join("missing-dir").join("r.json");
    assert_eq!(code(&tabletop(&["check-exact", s(&spec), "--out", s(&unwritable)], None)), 74);
}
