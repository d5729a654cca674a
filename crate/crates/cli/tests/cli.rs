use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sample(name: &str) -> String {
    root().join("samples").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laterproof")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_report(proof: &str) -> serde_json::Value {
    let sys = sample("stream_positive.sys");
    let prf = sample(proof);
    let out = run(&["check", &sys, &prf, "--semantic", "--depth", "64", "--format", "json"]);
    let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json report");
    v["timing_ms"] = 0.into();
    v
}

fn golden(name: &str) -> serde_json::Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).expect("golden file")).expect("golden json")
}

#[test]
fn running_example_checks_semantically() {
    let out = run(&["check", &sample("stream_positive.sys"), &sample("stream_positive.prf"), "--semantic", "--depth", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("ok: 9 rule applications, 0 open leaves (semantic, depth 64)"));
}

#[test]
fn bad_script_exits_one_with_node_path() {
    let out = run(&["check", &sample("stream_positive.sys"), &sample("bad.prf")]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("FAILED root.0.0.0.1.0"), "{text}");
    assert!(text.contains("9:22: axiom"), "{text}");
}

#[test]
fn json_reports_match_golden_files() {
    assert_eq!(json_report("stream_positive.prf"), golden("stream_positive.json"));
    assert_eq!(json_report("bad.prf"), golden("bad.json"));
}

#[test]
fn json_ok_agrees_with_entries() {
    for proof in ["stream_positive.prf", "bad.prf"] {
        let v = json_report(proof);
        let all_ok = v["entries"].as_array().unwrap().iter().all(|e| e["status"] == "ok");
        assert_eq!(v["ok"].as_bool().unwrap(), all_ok);
    }
}

#[test]
fn parse_errors_exit_two_with_location() {
    let dir = std::env::temp_dir().join(format!("laterproof-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let sys = dir.join("broken.sys");
    std::fs::write(&sys, "(sde x (tail x))\n").unwrap();
    let out = run(&["check", sys.to_str().unwrap(), &sample("stream_positive.prf")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.sys:1:1: missing head"), "{err}");

    let prf = dir.join("broken.prf");
    std::fs::write(&prf, "(goal top)\n(proof (lob))\n").unwrap();
    let out = run(&["check", &sample("stream_positive.sys"), prf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2:8: lob expects name and subproof"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["check"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["eval", &sample("quant.sys"), "NOPE", "--index", "1"]).status.code(), Some(2));
}

#[test]
fn oracle_agrees_with_chain_limit() {
    let out = run(&["oracle", &sample("lts2.sys"), "BISIM"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let expected = "{(p, p), (p, r), (q, q), (q, s), (r, p), (r, r), (s, q), (s, s), (u, u)}";
    assert!(text.contains(&format!("greatest fixed point: {expected}")), "{text}");
    assert!(text.contains(&format!("chain limit: {expected}")), "{text}");
}

#[test]
fn eval_discounted_sum() {
    let out = run(&["eval", &sample("quant.sys"), "D", "--index", "3", "--element", "half"]);
    assert_eq!(out.status.code(), Some(0));
    // 1/2·1/2 + 1/4·1/2 + 1/8·1/2 + 1/8
    assert!(stdout(&out).trim_end().ends_with(": 9/16"), "{}", stdout(&out));
}

#[test]
fn compat_reports_status() {
    let out = run(&["compat", &sample("stream_positive.sys"), "C", "PHI"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("C for PHI: proved_causality"));
    let out = run(&["compat", &sample("lts2.sys"), "CV", "BISIM", "--budget", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}
