use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ril_core::fixtures;
use serde_json::Value;
use tempfile::TempDir;

fn ril(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ril")).args(args).output().expect("binary runs")
}

fn ril_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ril")).args(args).env("RIL_THREADS", threads).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stderr(o)))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn fixture(dir: &Path, name: &str) -> String {
    let m = fixtures::by_name(name).unwrap();
    write(dir, &format!("{name}.json"), &m.to_file().to_json()).display().to_string()
}

fn close(v: &Value, want: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= tol
}

#[test]
fn solve_loop() {
    let dir = TempDir::new().unwrap();
    let o = ril(&["solve", &fixture(dir.path(), "loop")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["command"], "solve");
    assert!(close(&r["verdict"]["q_star"]["v"][0], 10.0, 1e-9));
    assert!(close(&r["verdict"]["j"]["supportive_optimal"], 10.0, 1e-9));
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn solve_two_actions() {
    let dir = TempDir::new().unwrap();
    let o = ril(&["solve", &fixture(dir.path(), "two"), "--beta", "1"]);
    let r = report(&o);
    assert!(close(&r["verdict"]["q_star"]["q"][0][1], 3.0, 1e-9));
    assert!(close(&r["verdict"]["q_uniform"]["v"][0], 2.5, 1e-12));
    assert!(close(&r["verdict"]["policies"]["boltzmann"]["probs"][0][1], 0.622_459_331_201_854_6, 1e-9));
    assert_eq!(r["verdict"]["optimal_actions"], serde_json::json!([[1]]));
}

#[test]
fn invalid_mdp_exits_2() {
    let dir = TempDir::new().unwrap();
    let mut f = fixtures::m_loop().to_file();
    f.tau[0][0][0] = 0.5;
    let p = write(dir.path(), "bad.json", &f.to_json());
    let o = ril(&["solve", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("row sum 0.5 ≠ 1"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_file_and_unknown_names_exit_2() {
    assert_eq!(code(&ril(&["solve", "/nonexistent/mdp.json"])), 2);
    assert_eq!(code(&ril(&["check", "--kind", "nope", "--class", "PS"])), 2);
    assert_eq!(code(&ril(&["check", "--kind", "q_star", "--class", "XX"])), 2);
    assert_eq!(code(&ril(&["solve", "--frobnicate"])), 2);
    assert_eq!(code(&ril(&[])), 2);
}

#[test]
fn non_convergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let mut f = fixtures::m_loop().to_file();
    f.gamma = 0.9999;
    let p = write(dir.path(), "slow.json", &f.to_json());
    let o = ril(&["solve", p.to_str().unwrap(), "--max-iters", "10"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn bad_threads_variable_exits_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&ril_env(&["solve", &fixture(dir.path(), "loop")], "zero")), 2);
}

#[test]
fn config_files_fill_defaults_and_reject_unknown_fields() {
    let dir = TempDir::new().unwrap();
    let mdp = fixture(dir.path(), "two");
    let cfg = write(dir.path(), "cfg.json", r#"{"solver": {"beta": 2.0}}"#);
    let o = ril(&["solve", &mdp, "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["config"]["solver"]["beta"], 2.0);
    assert_eq!(r["config"]["trials"], 100);
    assert_eq!(r["inputs"].as_array().unwrap().len(), 2);
    let bad = write(dir.path(), "bad.json", r#"{"trails": 5}"#);
    assert_eq!(code(&ril(&["solve", &mdp, "--config", bad.to_str().unwrap()])), 2);
}

#[test]
fn transform_writes_replayable_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = ril(&["transform", &fixture(dir.path(), "transfer"), "--class", "SR", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let verdict: Value = serde_json::from_str(&std::fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["spec"]["kind"], "s_prime_redistribution");
    let spec = write(dir.path(), "spec.json", &verdict["spec"].to_string());
    let again = ril(&["transform", &fixture(dir.path(), "transfer"), "--spec", spec.to_str().unwrap()]);
    assert_eq!(report(&again)["verdict"]["mdp"], verdict["mdp"]);
    let text = std::fs::read_to_string(out.join("transformed.json")).unwrap();
    ril_core::Mdp::from_file(ril_core::MdpFile::from_json(&text).unwrap()).unwrap();
}

#[test]
fn check_and_search() {
    let o = ril(&["check", "--kind", "q_star", "--class", "SR", "--trials", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&o)["verdict"]["status"], "Invariant");
    let o = ril(&["check", "--kind", "q_star", "--class", "PS", "--search"]);
    let r = report(&o);
    assert!(r["verdict"]["witness"].is_object());
    assert!(stderr(&o).contains("witness found"));
}

#[test]
fn search_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = ril_env(
            &[
                "check",
                "--kind",
                "cmp_noiseless_fragments",
                "--class",
                "ZP",
                "--search",
                "--out",
                out.to_str().unwrap(),
            ],
            threads,
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(out.join("verdict.json")).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn order_rosters() {
    let dir = TempDir::new().unwrap();
    let o = ril(&["order", "--kinds", "q_star"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&o)["verdict"]["edges"], serde_json::json!([]));

    let out = dir.path().join("order");
    let o = ril(&["order", "--kinds", "q_star,return_trajectories", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["edges"], serde_json::json!([]));
    let inc = &v["incomparable"][0];
    assert!(inc["witness_a_not_b"].is_object() && inc["witness_b_not_a"].is_object());
    assert!(std::fs::read_to_string(out.join("hasse.dot")).unwrap().starts_with("digraph"));
}

#[test]
fn table_subset() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "table.json",
        r#"{"trials": 20, "budget": 60, "kinds": ["q_star"], "classes": ["SR", "PS", "LS"]}"#,
    );
    let o = ril(&["table", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&o)["verdict"]["diffs"], 0);
    let o = ril(&["table", "--config", cfg.to_str().unwrap(), "--tol", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("tol must be positive"));
}

fn transfer(dir: &Path, l: f64) -> Output {
    let target = fixtures::m_transfer_target(l);
    let tau = write(dir, "tau.json", &serde_json::to_string(&target.tau_prime).unwrap());
    let l = write(dir, "l.json", &serde_json::to_string(&target.l).unwrap());
    ril(&["transfer-demo", &fixture(dir, "transfer"), tau.to_str().unwrap(), l.to_str().unwrap()])
}

#[test]
fn transfer_demo() {
    let dir = TempDir::new().unwrap();
    let o = transfer(dir.path(), 5.0);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = &report(&o)["verdict"];
    assert!(close(&v["r2"][0][0][0], -9.0, 1e-9) && close(&v["r2"][0][0][1], 11.0, 1e-9));
    assert_eq!(v["checks"]["pass"], true);

    let v = &report(&transfer(dir.path(), 1.0))["verdict"];
    assert_eq!(v["flipped"], false);
    assert!(close(&v["r2"][0][0][0], 1.0, 1e-12));

    let v = &report(&transfer(dir.path(), 20.0))["verdict"];
    assert_eq!(v["flipped"], true);
    assert_eq!(v["flipped_states"], serde_json::json!([0]));
}

#[test]
fn transfer_target_on_unchanged_row_exits_2() {
    let dir = TempDir::new().unwrap();
    let m = fixtures::m_transfer();
    let tau = write(dir.path(), "tau.json", &serde_json::to_string(&m.to_file().tau).unwrap());
    let l = write(dir.path(), "l.json", "[[5.0, null], [null, null]]");
    let o = ril(&["transfer-demo", &fixture(dir.path(), "transfer"), tau.to_str().unwrap(), l.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
