use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ehrenfest_cli::output::read_point_cloud;

const SMALL: &str = r#"
schema_version = 1
name = "small"
scenario = "quartic"

[initial]
x0 = [0.0]
p0 = [2.0]
hbar = 0.03

[grid]
extent = [[-2.5, 2.5]]
points = [1024]

[time]
steps_per_period = 256
t_final = 30.0

[ensemble]
size = 5000
seed = 11
snapshot_times = [30.0]

[analysis]
phase_space = { x = [-1.8, 1.8], p = [-3.0, 3.0], times = [0.0, 30.0] }
"#;

fn ehrenfest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehrenfest")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let one = ehrenfest(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]);
    let two = ehrenfest(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"]);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert!(two.status.success(), "{}", String::from_utf8_lossy(&two.stderr));
    let (fa, fb) = (data_files(&a), data_files(&b));
    assert!(fa.iter().any(|f| f.0 == "ensemble.csv") && fa.iter().any(|f| f.0 == "quantum.csv"));
    assert_eq!(fa, fb);

    let (t, dim, points) = read_point_cloud(&fs::read(a.join("cloud_t30.bin")).unwrap()).unwrap();
    assert_eq!((dim, points.len()), (1, 5000));
    assert!((t - 30.0).abs() < 0.1);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seeds"][0], 11);
    let quantum = fs::read_to_string(a.join("quantum.csv")).unwrap();
    assert!(quantum.starts_with(&format!("# scenario={} hbar=0.03\n", manifest["scenario_hash"].as_str().unwrap())));
}

#[test]
fn seed_override_changes_the_ensemble_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(ehrenfest(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(ehrenfest(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed-override", "12"]).status.success());
    let body = |d: &Path, f: &str| fs::read_to_string(d.join(f)).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a, "quantum.csv"), body(&b, "quantum.csv"));
    assert_ne!(body(&a, "ensemble.csv"), body(&b, "ensemble.csv"));
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &SMALL.replace("points = [1024]", "points = [1024]\nspacing = 2"));
    let out = ehrenfest(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spacing"));

    let cfg = write(tmp.path(), "neg.toml", &SMALL.replace("hbar = 0.03", "hbar = -0.03"));
    let out = ehrenfest(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hbar"));
}

#[test]
fn single_point_sweep_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "one.toml", &format!("{SMALL}\n[sweep]\nhbar = [0.03]\n"));
    let out = ehrenfest(&["sweep", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 4"));
}

#[test]
fn help_version_and_usage_errors() {
    assert_eq!(ehrenfest(&["--help"]).status.code(), Some(0));
    assert_eq!(ehrenfest(&["--version"]).status.code(), Some(0));
    assert_eq!(ehrenfest(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ehrenfest(&["run", "--threads", "lots"]).status.code(), Some(1));
}

#[test]
fn examples_table_is_printed_and_written() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ehrenfest(&["examples", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("ball in box") && text.contains("hydrogen"));
    let csv = fs::read_to_string(tmp.path().join("examples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}
