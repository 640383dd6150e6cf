//! End-to-end runs of the `platform-qbd` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use platform_qbd_cli::output::COLUMNS;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("platform-qbd-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path
}

fn platform_qbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platform-qbd"))
        .args(args)
        .output()
        .expect("binary runs")
}

const ANCHOR: &str = r#"{"model": "one", "params": {"lambda": 10, "mu": 1, "gamma": 100, "n_owners": 60}}"#;

#[test]
fn stability_prints_the_traffic_intensity() {
    let dir = scratch_dir("stability");
    let cfg = write_config(&dir, ANCHOR);
    let out = platform_qbd(&["stability", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,rho,stable,n_min_exact,n_min_corollary,drift_up,drift_down"
    );
    assert!(lines.next().unwrap().starts_with("one,0.168333333333,true,11,"));
}

#[test]
fn solve_writes_the_results_schema() {
    let dir = scratch_dir("solve");
    let cfg = write_config(&dir, ANCHOR);
    let prefix = dir.join("anchor");
    let out = platform_qbd(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(format!("{}.csv", prefix.display())).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), COLUMNS.len());
    let col = |name: &str| row[COLUMNS.iter().position(|c| *c == name).unwrap()];
    assert_eq!(col("model"), "one");
    assert_eq!(col("stable"), "true");
    assert_eq!(col("source"), "analytic");
    assert!((col("eq1").parse::<f64>().unwrap() - 50.0).abs() < 1e-6);
    assert!(Path::new(&format!("{}_detail.json", prefix.display())).exists());
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = scratch_dir("exit");
    let missing = write_config(
        &dir,
        r#"{"model": "one", "params": {"lambda": 10, "gamma": 100, "n_owners": 60}}"#,
    );
    assert_eq!(
        platform_qbd(&["solve", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    let unstable = write_config(
        &dir,
        r#"{"model": "one", "params": {"lambda": 61, "mu": 1, "gamma": 100, "n_owners": 60}}"#,
    );
    assert_eq!(
        platform_qbd(&["solve", "--config", unstable.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        platform_qbd(&["stability", "--config", unstable.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let two = write_config(
        &dir,
        r#"{"model": "two", "params": {"lambda": 0.3, "mu": 1, "gamma": 2, "n_owners": 1}}"#,
    );
    let out = platform_qbd(&["sojourn", "--config", two.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("model,mean_rg,mean_little"));

    let nowhere = dir.join("absent.json");
    assert_eq!(
        platform_qbd(&["solve", "--config", nowhere.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_emits_one_row_per_point() {
    let dir = scratch_dir("sweep");
    let cfg = write_config(
        &dir,
        r#"{"model": "one", "params": {"lambda": 10, "mu": 0.26, "gamma": 100, "n_owners": 43},
            "sweep": {"parameter": "n_owners", "from": 43, "to": 53, "steps": 10}}"#,
    );
    let out = platform_qbd(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    let n_col = COLUMNS.iter().position(|c| *c == "n_owners").unwrap();
    let owners: Vec<&str> = rows.iter().map(|r| r.split(',').nth(n_col).unwrap()).collect();
    assert_eq!(owners.first(), Some(&"43"));
    assert_eq!(owners.last(), Some(&"53"));
}

#[test]
fn unstable_sweep_points_need_the_flag() {
    let dir = scratch_dir("sweep-unstable");
    let cfg = write_config(
        &dir,
        r#"{"model": "one", "params": {"lambda": 10, "mu": 0.26, "gamma": 100, "n_owners": 37},
            "sweep": {"parameter": "n_owners", "from": 37, "to": 41, "steps": 4}}"#,
    );
    assert_eq!(
        platform_qbd(&["sweep", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let out = platform_qbd(&["sweep", "--config", cfg.to_str().unwrap(), "--allow-unstable"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let stable_col = COLUMNS.iter().position(|c| *c == "stable").unwrap();
    let flags: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|r| r.split(',').nth(stable_col).unwrap())
        .collect();
    assert_eq!(flags, ["false", "false", "true", "true", "true"]);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = scratch_dir("determinism");
    let cfg = write_config(
        &dir,
        r#"{"model": "two", "params": {"lambda": 1.2, "mu": 1, "gamma": 2, "n_owners": 3},
            "sim": {"max_events": 50000, "replications": 4, "base_seed": 3}}"#,
    );
    let run = |name: &str| {
        let prefix = dir.join(name);
        let out = platform_qbd(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let mut bytes = std::fs::read(format!("{}.csv", prefix.display())).unwrap();
        bytes.extend(std::fs::read(format!("{}_sim.csv", prefix.display())).unwrap());
        bytes
    };
    let first = run("a");
    assert_eq!(first, run("b"));
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains(",simulated,"));
    assert!(text.contains("metric,analytic,sim_mean,ci_halfwidth,within_ci,replications,seed"));
}
