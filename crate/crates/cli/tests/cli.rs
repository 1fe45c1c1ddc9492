use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mm")).args(args).output().unwrap()
}

fn write_points(dir: &Path) -> String {
    let path = dir.join("pts.csv");
    std::fs::write(&path, "x\n0.0\n0.1\n0.2\n5.0\n5.1\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sample_dist_kmeans_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write_points(dir.path());
    let d = dir.path().join("d.csv");
    let out = mm(&["dist", "--method", "euclid", "--in", &pts, "--out", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mm(&["kmeans", "--space", d.to_str().unwrap(), "--k", "2", "--exact"]);
    assert!(out.status.success());
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["minimizers"], serde_json::json!([[1, 3], [1, 4]]));

    let s1 = mm(&["sample", "--generator", "circle", "--n", "50", "--seed", "4"]);
    let s2 = mm(&["sample", "--generator", "circle", "--n", "50", "--seed", "4"]);
    assert!(s1.status.success());
    assert_eq!(s1.stdout, s2.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write_points(dir.path());
    let d = dir.path().join("d.bin");
    let d = d.to_str().unwrap();
    assert_eq!(mm(&["dist", "--method", "euclid", "--in", &pts, "--out", d]).status.code(), Some(0));

    assert_eq!(mm(&["kmeans", "--space", d, "--k", "0"]).status.code(), Some(2));
    assert_eq!(mm(&["kmeans", "--space", "/nonexistent/space.bin", "--k", "1"]).status.code(), Some(2));
    assert_eq!(mm(&["kmeans", "--space", d, "--k", "2", "--exact", "--budget", "1"]).status.code(), Some(3));
    let iso = dir.path().join("iso.bin");
    let out = mm(&["dist", "--method", "isomap", "--eps", "0.5", "--in", &pts, "--out", iso.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}
