//! End-to-end tests of the `krpt` binary: exit codes, printed widths,
//! warnings, and reproducible CSV output.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_krpt"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("krpt-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small, stable configuration: per-pair transfer fractions stay well below
/// one and every solve finishes in milliseconds.
const TINY_CFG: &str = "\
diffusion = 1e-4
rate = 1.0
c0 = 1.0
domain = 1.0
dim = 1
n_dirac = 100
n_gauss = 50
dt = 0.1
t_final = 2.0
seed = 7
n_realizations = 2
";

fn write_cfg(dir: &PathBuf, text: &str) -> PathBuf {
    let path = dir.join("test.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

#[test]
fn missing_config_exits_with_usage_error() {
    let out = bin()
        .args(["simulate", "--config", "/nonexistent/nowhere.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/nowhere.cfg"));
}

#[test]
fn malformed_config_exits_with_usage_error() {
    let dir = scratch("badcfg");
    let cfg = write_cfg(&dir, "dt = banana\n");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("dt"));
}

#[test]
fn match_width_reports_width_and_tau_star() {
    let dir = scratch("matchwidth");
    let cfg = write_cfg(&dir, TINY_CFG);
    let out = bin()
        .args(["match-width", "--strategy", "t-star", "--t-star", "1.0", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("half_width ="), "{text}");
    assert!(text.contains("tau_star ="), "{text}");
}

#[test]
fn infeasible_matching_time_exits_with_solver_error() {
    let dir = scratch("infeasible");
    let cfg = write_cfg(&dir, TINY_CFG);
    let out = bin()
        .args([
            "match-width",
            "--strategy",
            "t-star",
            "--t-star",
            "1e9",
            "--config",
        ])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("tau*"), "{err}");
    // tau* itself was still printed before the failure.
    assert!(stdout(&out).contains("tau_star ="));
}

#[test]
fn simulate_writes_reproducible_traces() {
    let dir = scratch("simulate");
    let cfg = write_cfg(&dir, TINY_CFG);
    let out_dir = dir.join("out");
    let run = |tag: &str| {
        let out_path = dir.join(tag);
        let out = bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--output"])
            .arg(&out_path)
            .args(["--grid-points", "10"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("resolved half-width = 0 (dirac)"), "{text}");
        assert!(text.contains("damkohler ="), "{text}");
        fs::read(out_path.join("trace_dirac.csv")).unwrap()
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first, second, "repeat runs must be byte-identical");
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("# seed = 7"));
    assert!(text.contains("time,cbar_mean,cbar_std"));
    drop(out_dir);
}

#[test]
fn oversized_half_width_triggers_the_domain_warning() {
    let dir = scratch("warn");
    let cfg = write_cfg(&dir, TINY_CFG);
    let out = bin()
        .args(["simulate", "--kernel", "gaussian", "--half-width", "0.2", "--config"])
        .arg(&cfg)
        .args(["--output"])
        .arg(dir.join("out"))
        .args(["--grid-points", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("exceeds 0.12"), "{}", stderr(&out));
}

#[test]
fn moments_of_a_non_reacting_system_are_constant() {
    let dir = scratch("moments");
    let cfg = write_cfg(&dir, &TINY_CFG.replace("rate = 1.0", "rate = 0.0"));
    let out = bin()
        .args(["moments", "--kernel", "gaussian", "--half-width", "0.05", "--config"])
        .arg(&cfg)
        .args(["--output"])
        .arg(dir.join("out"))
        .args(["--grid-points", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for name in ["moments_dirac.csv", "moments_gaussian.csv"] {
        let text = fs::read_to_string(dir.join("out").join(name)).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 8, "{name}: header plus 7 rows");
        for row in &rows[1..] {
            let cbar: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(cbar, 1.0, "{name}: {row}");
        }
    }
}

#[test]
fn compare_bundle_includes_fd_only_when_requested() {
    let dir = scratch("compare");
    let cfg = write_cfg(&dir, TINY_CFG);
    let out = bin()
        .args(["compare", "--recipe", "tstar100", "--t-star", "1.0", "--config"])
        .arg(&cfg)
        .args(["--output"])
        .arg(dir.join("plain"))
        .args(["--grid-points", "6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.join("plain").join("compare_tstar100.csv")).unwrap();
    assert!(!text.contains("fd_mean"));
    assert!(text.contains("# max_particle_discrepancy = "));
    assert!(text.contains("lg_over_omega"));

    let out = bin()
        .args([
            "compare",
            "--recipe",
            "tstar100",
            "--t-star",
            "1.0",
            "--with-eulerian",
            "--config",
        ])
        .arg(&cfg)
        .args(["--output"])
        .arg(dir.join("fd"))
        .args(["--grid-points", "6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.join("fd").join("compare_tstar100.csv")).unwrap();
    assert!(text.contains("fd_mean"));
}

#[test]
fn snapshot_records_threshold_in_the_header() {
    let dir = scratch("snapshot");
    let cfg = write_cfg(&dir, TINY_CFG);
    let out = bin()
        .args(["snapshot", "--times", "1.0", "--config"])
        .arg(&cfg)
        .args(["--output"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.join("out").join("snapshot_t1.csv")).unwrap();
    assert!(text.contains("# mass_threshold = "));
    assert!(text.contains("time,species,position,mass"));
    assert!(text.lines().any(|l| l.contains(",A,") || l.contains(",B,")));
}

#[test]
fn bad_thread_cap_is_a_usage_error() {
    let dir = scratch("threads");
    let cfg = write_cfg(&dir, TINY_CFG);
    let out = bin()
        .env("KRPT_THREADS", "zero")
        .args(["match-width", "--strategy", "variable", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
