use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kwe::cli_io::CSV_HEADER;

fn kwe(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kwe"))
        .args(args)
        .arg(config)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"
[grid]
v_max = 3.0
n_v = 5
dim_x = 1
x_max = 4.0
n_x = 9
n_polar = 2
n_azimuthal = 4

[solver]
t_end = 0.5
dt = 0.125
boundary_budget = 1.0

[initial]
name = "gaussian"
amplitude = AMP

[output]
dir = "out"
snapshots = true
"#;

#[test]
fn zero_data_gives_an_all_zero_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("AMP", "0.0"));
    let out = kwe(&["run"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], 0.125 * k as f64);
        assert!(row[1..].iter().all(|x| *x == 0.0), "{row:?}");
    }
}

#[test]
fn alpha_equal_to_m_is_a_config_error_naming_the_weights() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{}\n[weights]\nM = 9.0\nalpha = 9.0\n", SMALL.replace("AMP", "0.01"));
    let cfg = write_config(dir.path(), &body);
    let out = kwe(&["run"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("WeightParams"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_keys_and_missing_files_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnv = 5\n");
    let out = kwe(&["run"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.nv"));
    let out = kwe(&["run"], &dir.path().join("absent.toml"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_write_identical_files() {
    let read_all = |root: &Path| {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(root.join("out"))
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = write_config(dir.path(), &SMALL.replace("AMP", "0.05"));
            let out = kwe(&["run"], &cfg);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            read_all(dir.path())
        })
        .collect();
    // the CSV plus one snapshot per step
    assert_eq!(runs[0].len(), 6);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn transport_check_passes_and_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("AMP", "0.0"));
    let out = kwe(&["transport-check"], &cfg);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().count() >= 3);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}
