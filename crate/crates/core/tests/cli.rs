//! The `qhuff` binary: golden reports, exit codes, determinism.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn data_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data"))
}

/// Runs from the data directory so ensemble paths in reports stay relative.
fn qhuff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhuff"))
        .args(args)
        .current_dir(data_dir())
        .env_remove("QHUFF_MAX_BRANCHES")
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = qhuff(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout_ok(args)).unwrap()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(data_dir().join("golden").join(name)).unwrap()
}

#[test]
fn analyze_goldens() {
    assert_eq!(stdout_ok(&["analyze", "--ensemble", "e1.json"]), golden("analyze_e1.json"));
    assert_eq!(stdout_ok(&["analyze", "--ensemble", "e2.json"]), golden("analyze_e2.json"));
}

#[test]
fn storage_goldens() {
    let args = ["storage", "--ensemble", "e2.json", "--n", "2", "--delta", "0.25"];
    assert_eq!(stdout_ok(&args), golden("storage_e2.json"));
    let mut text = vec!["--format", "text"];
    text.extend_from_slice(&args);
    assert_eq!(stdout_ok(&text), golden("storage_e2.txt"));
}

#[test]
fn analyze_values() {
    let v = json(&["analyze", "--ensemble", "e1.json"]);
    let c = std::f64::consts::FRAC_PI_8.cos().powi(2);
    let h = -(c * c.log2() + (1.0 - c) * (1.0 - c).log2());
    assert!((v["entropy"].as_f64().unwrap() - h).abs() < 1e-11);
    let v = json(&["analyze", "--ensemble", "e2.json"]);
    assert_eq!(v["code"]["codewords"], serde_json::json!(["0", "10", "110", "111"]));
    assert_eq!(v["redundancy"].as_f64(), Some(0.0));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["analyze", "--ensemble", "bad_probs.json"],
        vec!["analyze", "--ensemble", "missing.json"],
        vec!["storage", "--ensemble", "e2.json", "--n", "3"],
        vec!["comm", "--ensemble", "e2.json", "--n", "4", "--truncate-at", "0"],
        vec!["comm", "--ensemble", "e2.json", "--n", "4", "--truncate-at", "5"],
        vec!["storage", "--ensemble", "e2.json"],
        vec!["frobnicate"],
    ] {
        let out = qhuff(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn resource_refusal_exits_3() {
    let out = Command::new(env!("CARGO_BIN_EXE_qhuff"))
        .args(["storage", "--ensemble", "e2.json", "--n", "16", "--exact"])
        .current_dir(data_dir())
        .env("QHUFF_MAX_BRANCHES", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        vec!["storage", "--ensemble", "e3.json", "--n", "4", "--trials", "5", "--seed", "7"],
        vec!["comm", "--ensemble", "e3.json", "--n", "4", "--truncate-at", "2", "--truncate-after", "3"],
        vec!["scale", "--ensemble", "e2.json", "--mode", "comm", "--n-list", "2,4,8"],
    ] {
        assert_eq!(stdout_ok(&args), stdout_ok(&args), "{args:?}");
    }
}

#[test]
fn seed_is_echoed_and_costs_ignore_it() {
    let base = ["storage", "--ensemble", "e3.json", "--n", "4", "--trials", "3"];
    let a = json(&[&base[..], &["--seed", "1"]].concat());
    let b = json(&[&base[..], &["--seed", "2"]].concat());
    assert_eq!(a["command"]["seed"], 1);
    assert_eq!(a["storage"]["depth"], b["storage"]["depth"]);
}

#[test]
fn comm_truncation_matches_storage_block() {
    // Stopping a streamed session after m signals costs the same fidelity
    // as storing a block of m signals with the same slack.
    for (m, delta) in [(1, "0.25"), (2, "0.25"), (2, "0.5"), (4, "0.5")] {
        let ms = m.to_string();
        let s = json(&["storage", "--ensemble", "e2.json", "--n", &ms, "--delta", delta]);
        let c = json(&["comm", "--ensemble", "e2.json", "--n", "4", "--delta", delta, "--truncate-at", &ms]);
        assert_eq!(s["storage"]["fidelity"], c["comm"]["fidelity"], "m={m} delta={delta}");
        assert_eq!(s["storage"]["truncate_len"], c["comm"]["truncate_len"]);
    }
}

#[test]
fn trace_file_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.txt");
    let p = path.to_str().unwrap();
    stdout_ok(&["comm", "--ensemble", "e2.json", "--n", "4", "--delta", "0.5", "--trace", p]);
    let first = std::fs::read_to_string(&path).unwrap();
    assert!(first.lines().count() > 0);
    assert!(first.lines().all(|l| l.starts_with('(') && l.ends_with(')')));
    stdout_ok(&["comm", "--ensemble", "e2.json", "--n", "4", "--delta", "0.5", "--trace", p]);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
}
