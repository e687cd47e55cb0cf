use std::path::PathBuf;
use std::process::{Command, Output};

use polyflow_cli::presets::{preset, NAMES};
use polyflow_cli::RunConfig;
use polyflow_core::diagnostics::CSV_HEADER;

fn polyflow(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polyflow"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polyflow-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// A small equilibrium run writing its CSV into `dir`.
fn tiny_config(dir: &std::path::Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "[domain]\nnx = 4\nny = 4\n\n[polymer]\nnr = 6\nntheta = 8\n\n[scheme]\nT = 0.03\nN = 3\n\n[output]\ncsv_path = \"{}\"\n{extra}",
        dir.join("diag.csv").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &std::path::Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn presets_print_and_parse_back() {
    for name in NAMES {
        let out = polyflow(&["preset", name], &[]);
        assert!(out.status.success(), "{name}");
        let parsed = RunConfig::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(parsed, preset(name).unwrap(), "{name}");
    }
    assert_eq!(polyflow(&["preset", "nope"], &[]).status.code(), Some(2));
}

#[test]
fn simulate_writes_one_row_per_level() {
    let dir = scratch("simulate");
    let config = tiny_config(&dir, "");
    let out = polyflow(&["simulate", "--config", config.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.join("diag.csv"));
    assert_eq!(rows.len(), 4);
    let col = CSV_HEADER.iter().position(|h| *h == "lambda_max").unwrap();
    let lambda: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
    assert!(lambda.iter().all(|l| (l - lambda[0]).abs() <= 1e-12), "{lambda:?}");
    let steps: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(steps, vec![0, 1, 2, 3]);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn environment_overrides_the_file() {
    let dir = scratch("env");
    let config = tiny_config(&dir, "");
    let out = polyflow(&["simulate", "--config", config.to_str().unwrap()], &[("POLYFLOW_SCHEME_N", "1")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_csv(&dir.join("diag.csv")).len(), 2);
    let bad = polyflow(&["simulate", "--config", config.to_str().unwrap()], &[("POLYFLOW_SCHEME_NOPE", "1")]);
    assert_eq!(bad.status.code(), Some(2));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn snapshots_land_in_the_requested_directory() {
    let dir = scratch("snap");
    let snaps = dir.join("psi");
    let config = tiny_config(&dir, &format!("snapshot_every = 2\nsnapshot_dir = \"{}\"\n", snaps.display()));
    let out = polyflow(&["simulate", "--config", config.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> =
        std::fs::read_dir(&snaps).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, vec!["psi_000000.csv", "psi_000002.csv"]);
    let text = std::fs::read_to_string(snaps.join("psi_000002.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("ix,iy,ir1,itheta1,value"));
    assert_eq!(text.lines().count(), 1 + 16 * 6 * 8);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn configuration_errors_exit_with_status_two() {
    let dir = scratch("errors");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "[polymer]\nb = [2.0]\n").unwrap();
    let out = polyflow(&["simulate", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("polymer.b"));

    std::fs::write(&path, "[domain]\nnx = 4\n\n[scheme]\nbogus = 1\n").unwrap();
    let out = polyflow(&["check", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));

    let missing = polyflow(&["simulate", "--config", dir.join("absent.toml").to_str().unwrap()], &[]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(polyflow(&["oracle", "nope"], &[]).status.code(), Some(2));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn check_passes_on_a_small_equilibrium() {
    let dir = scratch("check");
    let config = tiny_config(&dir, "");
    let out = polyflow(&["check", "--config", config.to_str().unwrap()], &[]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.lines().count() > 10);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn translation_oracle_reports_a_table() {
    let out = polyflow(&["oracle", "translation"], &[]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 4, "{stdout}");
}
