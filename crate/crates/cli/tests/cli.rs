use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gdb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdb")).args(args).current_dir(dir).output().expect("gdb runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ring(points: &[(f64, f64)]) -> String {
    let nodes: Vec<String> = points
        .iter()
        .enumerate()
        .map(|(i, (x, y))| format!(r#"{{"id":{},"pos":[{x},{y}],"role":"Peer"}}"#, i + 1))
        .collect();
    format!(
        r#"{{"nodes":[{}],"protocol":"MultiPartyRing","config":{{"n":2,"bit_len":1,"alpha":0.0,"c":299792458.0,"pre_post_msgs":2,"auth_enabled":false}},"experiment":{{}},"rng_seed":42}}"#,
        nodes.join(",")
    )
}

fn square() -> String {
    ring(&[(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)])
}

#[test]
fn run_four_node_ring() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), square()).unwrap();
    let o = gdb(&["run", "s.json", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let out = dir.path().join("out");
    let bounds = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let mut lines = bounds.lines();
    assert_eq!(lines.next(), Some("measurer,target,bound_m,method,auth_ok"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for row in rows {
        let bound: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((bound - 100.0).abs() < 1e-6 || (bound - 100.0 * 2f64.sqrt()).abs() < 1e-6, "{row}");
    }

    let detection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("detection.json")).unwrap()).unwrap();
    assert!(detection["detection"]["evidence"].as_array().unwrap().is_empty());
    assert!(detection["session_failures"].as_array().unwrap().is_empty());
    assert!(fs::read_to_string(out.join("trace.jsonl")).unwrap().lines().count() > 0);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 3);
    for a in artifacts {
        assert!(out.join(a["name"].as_str().unwrap()).exists());
        assert_eq!(a["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn manifest_digests_are_reproducible() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), square()).unwrap();
    let digests = |out: &str, seed: &str| {
        let o = gdb(&["run", "s.json", "--seed", seed, "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(out).join("manifest.json")).unwrap()).unwrap();
        m["artifacts"].clone()
    };
    assert_eq!(digests("a", "7"), digests("b", "7"));
    assert_ne!(digests("a", "7"), digests("c", "8"));
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), "{\"nodes\": [").unwrap();
    let o = gdb(&["run", "s.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_is_named() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), square().replace("\"rng_seed\"", "\"colour\":1,\"rng_seed\"")).unwrap();
    let o = gdb(&["run", "s.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(gdb(&["run", "absent.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn three_node_ring_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), ring(&[(0.0, 0.0), (100.0, 0.0), (0.0, 100.0)])).unwrap();
    let o = gdb(&["run", "s.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("N must be ≥ 4"), "{}", stderr(&o));
}

#[test]
fn invalid_field_is_named() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), square().replace("\"n\":2", "\"n\":0")).unwrap();
    let o = gdb(&["run", "s.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.n"), "{}", stderr(&o));
}

#[test]
fn failed_authentication_exits_3() {
    let dir = TempDir::new().unwrap();
    let s = r#"{"nodes":[{"id":1,"pos":[0,0],"role":"ActiveVerifier"},{"id":2,"pos":[50,0],"role":"Prover","policy":{"kind":"NodeInsertion"},"has_cert":false}],"protocol":"OneWayDB","config":{"n":3,"bit_len":1,"alpha":0.0,"c":299792458.0,"pre_post_msgs":2,"auth_enabled":true},"experiment":{},"rng_seed":5}"#;
    fs::write(dir.path().join("s.json"), s).unwrap();
    let o = gdb(&["run", "s.json", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let detection = fs::read_to_string(dir.path().join("out/detection.json")).unwrap();
    assert!(detection.contains("AuthFailure"), "{detection}");
}

#[test]
fn sweep_writes_per_seed_directories() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), square()).unwrap();
    let o = gdb(&["--workers", "2", "sweep", "s.json", "--seed", "10", "--count", "3", "--out", "sw"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for seed in 10..13 {
        assert!(dir.path().join(format!("sw/seed-{seed}/manifest.json")).exists());
    }
    let summary = fs::read_to_string(dir.path().join("sw/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 12);
}

#[test]
fn figures_are_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    assert_eq!(gdb(&["figures", "--which", "6c", "--out", "a"], dir.path()).status.code(), Some(0));
    assert_eq!(gdb(&["figures", "--which", "6c", "--out", "b"], dir.path()).status.code(), Some(0));
    let a = fs::read(dir.path().join("a/fig6c.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/fig6c.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("d_a,n_a,base,value,saving"));
    assert_eq!(text.lines().count(), 1 + 100);
}

#[test]
fn fig6a_has_the_half_half_cell() {
    let dir = TempDir::new().unwrap();
    assert_eq!(gdb(&["figures", "--which", "6a"], dir.path()).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("fig6a.csv")).unwrap();
    let cell = text.lines().find(|l| l.starts_with("0.5,0.5,")).unwrap();
    let v: f64 = cell.rsplit(',').next().unwrap().parse().unwrap();
    assert!((v - 0.98391).abs() < 1e-4, "{cell}");
}

#[test]
fn unknown_figure_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = gdb(&["figures", "--which", "6e"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("6e"));
}

// The exit code follows the criteria: 0 exactly when every line passes.
#[test]
fn verify_quick_reports_every_criterion() {
    let dir = TempDir::new().unwrap();
    let o = gdb(&["verify", "--quick"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert!(lines.len() >= 9, "{stdout}");
    let all_pass = lines.iter().all(|l| l.starts_with("[PASS]"));
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 3 }), "{stdout}");
}

#[test]
fn verify_catches_a_corrupted_solver() {
    let dir = TempDir::new().unwrap();
    let o = gdb(&["verify", "--quick", "--corrupt-solver"], dir.path());
    assert_ne!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("[FAIL] 7 ")), "{stdout}");
}
