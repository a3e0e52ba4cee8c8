use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_popforge"))
}

fn workdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("popforge-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_threshold_two() {
    let d = workdir("gen2");
    let o = run(&d, &["generate", "--kind", "threshold", "--n", "2", "--out", "t2.json"]);
    assert_eq!(code(&o), 0);
    let report = stdout_json(&o);
    assert_eq!(report["constants"]["k"], "10");
    assert_eq!(report["size"]["n_registers"], 9);
    let p = read_json(&d.join("t2.json"));
    assert_eq!(p["registers"].as_array().unwrap().len(), 9);
    let manifest = read_json(&d.join("t2.json.manifest.json"));
    assert_eq!(manifest["subcommand"], "generate");
    assert_eq!(manifest["parameters"]["n"], 2);
}

#[test]
fn generate_threshold_six_prints_exact_k() {
    let d = workdir("gen6");
    let o = run(&d, &["generate", "--kind", "threshold", "--n", "6", "--out", "t6.json"]);
    assert_eq!(code(&o), 0);
    let (mut level, mut sum) = (1u128, 0u128);
    for _ in 0..6 {
        sum += level;
        level = (level + 1) * (level + 1);
    }
    assert_eq!(stdout_json(&o)["constants"]["k"], (2 * sum).to_string());
}

#[test]
fn generate_rejects_zero_levels() {
    let d = workdir("gen0");
    assert_eq!(code(&run(&d, &["generate", "--kind", "threshold", "--n", "0", "--out", "t.json"])), 2);
}

#[test]
fn example_pipeline_and_verification() {
    let d = workdir("pipeline");
    assert_eq!(code(&run(&d, &["generate", "--kind", "example", "--out", "ex.json"])), 0);
    let o = run(&d, &["lower", "--in", "ex.json", "--out", "ex.m.json", "--emit-map", "ex.map.json"]);
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o)["ratio"].as_f64().unwrap() > 1.0);
    assert!(read_json(&d.join("ex.map.json"))["entries"]["Main"].is_number());

    let o = run(&d, &["compile", "--in", "ex.m.json", "--out", "ex.p.json", "--stats"]);
    assert_eq!(code(&o), 0);
    let stats = &stdout_json(&o)["stats"];
    assert_eq!(stats["states"].as_u64().unwrap(), 2 * stats["inner_states"].as_u64().unwrap());
    assert_eq!(stats["bound_holds"], true);

    let range = |expect: &str| code(&run(&d, &["verify", "--level", "program", "--in", "ex.json", "--m-max", "12", "--expect", expect]));
    // The program stabilises to true exactly for 4, 5 and 6 units.
    assert_eq!(range("range:4:6"), 0);
    assert_eq!(range("range:4:7"), 1);

    let o = run(
        &d,
        &["verify", "--level", "machine", "--in", "ex.m.json", "--m-max", "8", "--expect", "range:4:6", "--out", "vm.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&d.join("vm.json"));
    assert_eq!(report["per_m"].as_array().unwrap().len(), 9);
    assert!(d.join("vm.json.manifest.json").exists());
}

#[test]
fn threshold_two_program_level() {
    let d = workdir("t2verify");
    run(&d, &["generate", "--kind", "threshold", "--n", "2", "--out", "t2.json"]);
    let o = run(&d, &["verify", "--level", "program", "--in", "t2.json", "--m-max", "12", "--expect", "threshold:10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn threshold_one_round_trip_to_protocol() {
    let d = workdir("t1protocol");
    run(&d, &["generate", "--kind", "threshold", "--n", "1", "--out", "t1.json"]);
    run(&d, &["lower", "--in", "t1.json", "--out", "t1.m.json"]);
    let o = run(&d, &["compile", "--in", "t1.m.json", "--out", "t1.p.json"]);
    let f = stdout_json(&o)["stats"]["n_pointers"].as_u64().unwrap();
    let expect = format!("shifted:{f}:threshold:2");
    let m_max = (f + 1).to_string();
    let o = run(&d, &["verify", "--level", "protocol", "--in", "t1.p.json", "--m-max", &m_max, "--expect", &expect]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    // Two agents past |F| the exploration no longer fits a small cap.
    let m = (f + 2).to_string();
    let o = run(
        &d,
        &["verify", "--level", "protocol", "--in", "t1.p.json", "--m-min", &m, "--m-max", &m, "--expect", &expect, "--cap", "100000"],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn input_errors_exit_2() {
    let d = workdir("errors");
    fs::write(d.join("bad.json"), "{not json").unwrap();
    assert_eq!(code(&run(&d, &["lower", "--in", "bad.json", "--out", "x.json"])), 2);
    assert_eq!(code(&run(&d, &["lower", "--in", "missing.json", "--out", "x.json"])), 2);
    fs::write(d.join("empty.json"), r#"{"registers": [], "pointers": [], "instructions": []}"#).unwrap();
    let o = run(&d, &["compile", "--in", "empty.json", "--out", "p.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("is missing"), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&d, &["verify", "--level", "program", "--in", "bad.json", "--m-max", "1", "--expect", "nonsense"])), 2);
}

fn trivial_protocol(d: &Path) {
    let p = r#"{"states": ["a"], "initial": ["a"], "accepting": ["a"], "transitions": []}"#;
    fs::write(d.join("one.json"), p).unwrap();
}

#[test]
fn simulate_trivial_protocol_and_reproducibility() {
    let d = workdir("simulate");
    trivial_protocol(&d);
    let args = ["simulate", "--in", "one.json", "--m", "5", "--seeds", "10", "--window", "100", "--out"];
    let a = run(&d, &[&args[..], &["a.json"]].concat());
    assert_eq!(code(&a), 0);
    let b = run(&d, &[&args[..], &["b.json"]].concat());
    assert_eq!(a.stdout, b.stdout);
    let ra = read_json(&d.join("a.json"));
    assert_eq!(ra, read_json(&d.join("b.json")));
    assert_eq!(ra["summary"]["converged_fraction"], 1.0);
    assert_eq!(ra["summary"]["converged_true"], 10);
    assert_eq!(code(&run(&d, &["simulate", "--in", "one.json", "--m", "1"])), 2);
}

#[test]
fn protocol_verify_trivial() {
    let d = workdir("trivialverify");
    trivial_protocol(&d);
    let o = run(&d, &["verify", "--level", "protocol", "--in", "one.json", "--m-min", "1", "--m-max", "6", "--expect", "threshold:1"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn post_lemmas_constants() {
    let d = workdir("misc");
    run(&d, &["generate", "--kind", "threshold", "--n", "1", "--out", "t1.json"]);
    let o = run(&d, &["post", "--in", "t1.json", "--proc", "Zero@x1", "--regs", "x1=1,xb1=1"]);
    assert_eq!(code(&o), 0);
    let post = stdout_json(&o);
    // Either x1 is seen nonzero (false, unchanged) or the units of x1 and
    // xb1 are exchanged up to N_1 = 1 (true).
    let returns = post["returns"].as_array().unwrap();
    assert_eq!(returns.len(), 2);
    assert!(returns.contains(&serde_json::json!({"registers": {"xb1": 2}, "value": true})));
    assert!(returns.contains(&serde_json::json!({"registers": {"x1": 1, "xb1": 1}, "value": false})));
    assert_eq!(code(&run(&d, &["post", "--in", "t1.json", "--proc", "Zero@x1", "--regs", "nope=1"])), 2);

    let o = run(&d, &["lemmas", "--n", "1", "--max-total", "3", "--out", "lemmas.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&d.join("lemmas.json"))["counterexamples"].as_array().unwrap().len(), 0);

    let o = run(&d, &["constants", "--n", "10"]);
    assert_eq!(code(&o), 0);
    let rows = stdout_json(&o);
    assert!(rows.as_array().unwrap().iter().all(|r| r["k_at_least_tower"] == true));
    assert_eq!(rows[1]["k"], "10");
}

#[test]
fn outputs_are_canonical_and_thread_count_is_honoured() {
    let d = workdir("canonical");
    let o = bin()
        .current_dir(&d)
        .env("POPFORGE_THREADS", "1")
        .args(["generate", "--kind", "example", "--out", "ex.json"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(d.join("ex.json.manifest.json")).unwrap();
    let keys: Vec<&str> = text.lines().filter(|l| l.starts_with("  \"")).map(|l| l.trim().split('"').nth(1).unwrap()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(!keys.is_empty());
}
