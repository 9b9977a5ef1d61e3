//! End-to-end runs of the `otbm` binary.

use std::path::Path;
use std::process::{Command, Output};

fn otbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otbm")).args(args).output().expect("otbm runs")
}

fn ok(args: &[&str]) {
    let out = otbm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn attack_and_report_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    ok(&["suite", "--out", s(&suite)]);

    let mut summaries = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&["attack", "--scenario", s(&suite), "--budget", "12", "--seeds", "3", "--out", s(&out), "--protocol-trace"]);
        let summary = out.join("summary.json");
        ok(&["report", "--in", s(&out), "--out", s(&summary)]);
        for f in ["scores.csv", "traces.jsonl", "calibration.json", "protocol.jsonl", "evolution.csv", "distributions.csv"] {
            assert!(out.join(f).is_file(), "{run}/{f} missing");
        }
        summaries.push(std::fs::read(&summary).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
    for f in ["scores.csv", "traces.jsonl", "protocol.jsonl"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }

    let summary: serde_json::Value = serde_json::from_slice(&summaries[0]).unwrap();
    let names: Vec<_> = summary["scenarios"].as_object().unwrap().keys().cloned().collect();
    assert_eq!(names.len(), 7, "{names:?}");
}

#[test]
fn calibrate_writes_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    let cal = dir.path().join("cal.json");
    ok(&["suite", "--out", s(&suite)]);
    ok(&["calibrate", "--scenario", s(&suite), "--out", s(&cal)]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&cal).unwrap()).unwrap();
    assert!(v["unprotected"]["threshold"].is_number());
    assert!(v["otb-plain"]["metrics"]["eer"].is_number());
}

#[test]
fn gen_synth_and_quality() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-synth", "--identities", "2", "--captures", "2", "--seed", "4", "--out", s(dir.path())]);
    let a = dir.path().join("id_0000/cap_000.pgm");
    let b = dir.path().join("id_0000/cap_001.pgm");
    assert!(a.with_extension("lm").is_file());
    let out = otbm(&["quality", s(&a), s(&a)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mse"], 0.0);
    let out = otbm(&["quality", s(&a), s(&b)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["mse"].as_f64().unwrap() > 0.0);
    assert!(v["ssim"].as_f64().unwrap() < 1.0);
}

#[test]
fn configuration_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = otbm(&["attack", "--scenario", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let suite = dir.path().join("suite.json");
    ok(&["suite", "--out", s(&suite)]);
    let out = otbm(&["attack", "--scenario", s(&suite), "--seeds", "0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = otbm(&["gen-synth", "--jitter", "5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
