//! Runs the built `dockaug` binary and checks exit codes and reports.

use std::path::Path;
use std::process::{Command, Output};

fn dockaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dockaug")).args(args).output().expect("binary runs")
}

fn generate(dir: &Path, scene: &str) -> String {
    let out = dir.join("src");
    let o = dockaug(&["generate", "--scene", scene, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.to_str().unwrap().to_string()
}

#[test]
fn augment_pick_writes_four_demos_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let src = generate(dir.path(), "pick");
    let aug = dir.path().join("aug");
    let o = dockaug(&["augment", "--dataset", &src, "--out", aug.to_str().unwrap(), "--report", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["total_augmented"], 4);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(aug.join("manifest.json")).unwrap()).unwrap();
    let demos = manifest["demos"].as_array().unwrap();
    assert_eq!(demos.len(), 5);
    assert_eq!(demos.iter().filter(|d| d["provenance"]["kind"] == "augmented").count(), 4);
    assert!(aug.join("stats.json").exists());
    assert!(!dir.path().join("aug.partial").exists());

    let o = dockaug(&["verify", "--dataset", aug.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn corrupted_demo_fails_verification_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let src = generate(dir.path(), "pick");
    let file = Path::new(&src).join("demos/pick_src0.bin");
    let mut bytes = std::fs::read(&file).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&file, bytes).unwrap();

    let o = dockaug(&["verify", "--dataset", &src]);
    assert_eq!(o.status.code(), Some(5));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.lines().any(|l| l.starts_with("FAIL") && l.contains("pick_src0") && l.contains("checksum")), "{table}");
}

#[test]
fn missing_manifest_is_exit_3_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = dockaug(&["augment", "--dataset", dir.path().to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest.json"));
}

#[test]
fn infeasible_range_is_exhaustion_with_error_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let src = generate(dir.path(), "pick");
    let aug = dir.path().join("aug");
    let o = dockaug(&["--range", "4:5", "augment", "--dataset", &src, "--out", aug.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    // the run still leaves a complete dataset that records the failure
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(aug.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failures"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["demos"].as_array().unwrap().len(), 1);

    let o = dockaug(&["--range", "4:5", "sample", "--dataset", &src]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn bad_flags_are_exit_2() {
    assert_eq!(dockaug(&["--range", "1.2:0.8", "stats", "--dataset", "x"]).status.code(), Some(2));
    assert_eq!(dockaug(&["--retime", "sometimes", "stats", "--dataset", "x"]).status.code(), Some(2));
    assert_eq!(dockaug(&["--points", "100", "stats", "--dataset", "x"]).status.code(), Some(2));
}

#[test]
fn parse_and_sample_reports() {
    let dir = tempfile::tempdir().unwrap();
    let src = generate(dir.path(), "place");
    let o = dockaug(&["parse", "--dataset", &src, "--report", "json"]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let kinds: Vec<&str> = rows[0]["parsed"]["segments"].as_array().unwrap().iter().map(|s| s["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["motion", "skill", "motion", "skill"]);

    let o = dockaug(&["--docks", "2", "sample", "--dataset", &src, "--report", "json"]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[0]["accepted"].as_array().unwrap().len(), 2);
}

#[test]
fn eval_nn_writes_success_table() {
    let dir = tempfile::tempdir().unwrap();
    let src = generate(dir.path(), "pick");
    let table = dir.path().join("nn.json");
    let o = dockaug(&["eval-nn", "--dataset", &src, "--test-docks", "3", "--out", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(v[0]["scene"], "pick");
    assert_eq!(v[0]["table"]["feature_version"], 1);
    assert_eq!(v[0]["table"]["success"].as_array().unwrap().len(), 3);
}
