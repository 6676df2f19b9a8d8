use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bohmian-hhg"));
    c.env_remove("BHHG_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "\
grid.x_min = -100
grid.x_max = 100
grid.n_points = 1024
pulse.n_ramp = 0.5
pulse.n_flat = 0.5
schedule.dt = 0.2
schedule.snapshot_stride = 1
schedule.absorber_width = 20
bohmian.x0 = 0, 1.8
classical.n_points = 200
spectral.harmonic_step = 1
";

#[test]
fn bad_value_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pulse.E0 = -1\n");
    let out = dir.path().join("out");
    let o = run(&["eigen", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("E0"));
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# comment\n\npulse.colour = red\n");
    let o = run(&["eigen", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":3"), "{err}");
}

#[test]
fn unknown_pipeline_and_potential_are_config_errors() {
    assert_eq!(run(&["fig2"]).status.code(), Some(2));
    assert_eq!(run(&["eigen", "--potential", "coulomb"]).status.code(), Some(2));
}

#[test]
fn bad_thread_env_is_config_error() {
    let o = bin().args(["eigen"]).env("BHHG_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3_and_cleans_up() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}bohmian.rho_floor = 10\n"));
    let out = dir.path().join("out");
    let o = run(&["bohmian", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bohmian"));
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn eigen_writes_both_spectra_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["eigen", "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["eigen_softcore.csv", "eigen_truncated.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("eigen_softcore.csv")).unwrap();
    let e0: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((e0 + 0.66995).abs() < 1e-3, "{e0}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = bin()
            .args(["fig1", "--config", &cfg, "--out", out.to_str().unwrap()])
            .env("BHHG_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 5);
    for n in names {
        let x = std::fs::read(a.join(&n)).unwrap();
        let y = std::fs::read(b.join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
}

#[test]
fn potential_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&[
        "propagate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--potential",
        "truncated",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"potential.variant\": \"truncated\""), "{manifest}");
}
