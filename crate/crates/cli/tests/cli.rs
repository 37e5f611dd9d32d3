use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str = "t,max_u,max_du,max_d2u,max_d3u,psi_max,theta_min,theta_max,volume,dt";

fn lmcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmcf"))
        .args(args)
        .output()
        .expect("spawn lmcf")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(
        &path,
        format!("dim = 1\nsizes = 16\ncheckpoint_every = 5\n{body}"),
    )
    .unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn flat_data_converges_with_code_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "flat.cfg",
        "u0_preset = constant\nt_max = 0.1\n",
    );
    let out_dir = tmp.path().join("out");
    let out = lmcf(&["run", s(&cfg), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let monitors = fs::read_to_string(out_dir.join("monitors.csv")).unwrap();
    assert_eq!(monitors.lines().next(), Some(HEADER));
    assert!(out_dir.join("checkpoint.lmcf").is_file());
}

#[test]
fn short_horizon_times_out_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mode.cfg",
        "u0_preset = single_mode\nu0_amplitude = 1e-3\nt_max = 0.005\n",
    );
    let out = lmcf(&["run", s(&cfg), "-o", s(&tmp.path().join("out"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn steep_data_blows_up_with_code_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "steep.cfg",
        "u0_preset = single_mode\nu0_amplitude = 0.5\nt_max = 0.1\n",
    );
    let out = lmcf(&["run", s(&cfg), "-o", s(&tmp.path().join("out"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn bad_input_exits_with_code_one() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "bad.cfg", "u0_preset = constant\nbogus = 1\n");
    assert_eq!(code(&lmcf(&["run", s(&cfg), "-o", s(&out_dir)])), 1);
    assert_eq!(
        code(&lmcf(&["run", "no_such_experiment", "-o", s(&out_dir)])),
        1
    );
    assert_eq!(code(&lmcf(&["verify", "nonsense", "-o", s(&out_dir)])), 1);
    assert_eq!(code(&lmcf(&["run"])), 1);
}

#[test]
fn verify_geometry_suite_passes() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("verify");
    let out = lmcf(&["verify", "geometry", "-o", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let reports = fs::read_to_string(out_dir.join("reports.csv")).unwrap();
    assert!(reports.lines().count() > 1);
}

#[test]
fn sweep_reports_worst_code_and_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sweep.cfg",
        "u0_preset = single_mode\nu0_amplitude = 1e-3\nt_max = 0.005\n",
    );
    let out_dir = tmp.path().join("sweep");
    let out = lmcf(&[
        "sweep",
        s(&cfg),
        "--param",
        "kappa",
        "--values",
        "0,-1",
        "-o",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 2);
    let table = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("value,outcome,final_psi_max,fitted_rate")
    );
    assert_eq!(lines.count(), 2);

    let out = lmcf(&[
        "sweep",
        s(&cfg),
        "--param",
        "epsilon",
        "--values",
        "1e-3,0.5",
        "-o",
        s(&tmp.path().join("sweep2")),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn resume_continues_to_a_later_time() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mode.cfg",
        "u0_preset = single_mode\nu0_amplitude = 1e-3\nt_max = 0.005\n",
    );
    let first = tmp.path().join("first");
    assert_eq!(code(&lmcf(&["run", s(&cfg), "-o", s(&first)])), 2);
    let second = tmp.path().join("second");
    let out = lmcf(&[
        "resume",
        s(&first.join("checkpoint.lmcf")),
        "-o",
        s(&second),
        "--t-max",
        "0.01",
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let monitors = fs::read_to_string(second.join("monitors.csv")).unwrap();
    let last = monitors.lines().last().unwrap();
    let t: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!((t - 0.01).abs() < 1e-12, "{last}");

    let missing = lmcf(&["resume", s(&tmp.path().join("none.lmcf")), "-o", s(&second)]);
    assert_eq!(code(&missing), 1);
}
