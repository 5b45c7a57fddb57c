//! End-to-end tests of the `tumorch` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn tumorch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tumorch")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const SHORT: &str = "--set=time.t_end=0.02";

#[test]
fn validate_passes_on_bundled_scenarios() {
    let o = tumorch(&["validate", "--config", scenario("default.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    for l in ["(A1)", "(A2)", "(A3)", "(A4)"] {
        assert!(stdout(&o).contains(&format!("PASS {l}")), "{}", stdout(&o));
    }
    let o = tumorch(&["validate", "--config", scenario("obstacle.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    for l in ["(S1)", "(S2)", "(S3)"] {
        assert!(stdout(&o).contains(&format!("PASS {l}")), "{}", stdout(&o));
    }
}

#[test]
fn negative_kappa_is_a_config_error_citing_a1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("default.toml");
    let o = tumorch(&["simulate", "--config", cfg.to_str().unwrap(), "--set", "params.kappa=-1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("(A1)"), "{}", stderr(&o));
    assert!(!dir.path().join("manifest.toml").exists());
    let o = tumorch(&["validate", "--config", cfg.to_str().unwrap(), "--set", "params.kappa=-1"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("FAIL (A1)"));
}

#[test]
fn unbounded_interpolation_fails_a2() {
    let o = tumorch(&["validate", "--config", scenario("default.toml").to_str().unwrap(), "--set", "params.h=\"linear\""]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("FAIL (A2)"), "{}", stdout(&o));
}

#[test]
fn initial_data_outside_the_obstacle_fails_s3() {
    let o = tumorch(&["validate", "--config", scenario("obstacle.toml").to_str().unwrap(), "--set", "initial.phi0=\"-1 + 2.5*sin(pi*x)\""]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("FAIL (S3)"), "{}", stdout(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[params]\nkapa = 1.0\n");
    let o = tumorch(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("kapa"), "{}", stderr(&o));
    let o = tumorch(&["validate", "--config", scenario("default.toml").to_str().unwrap(), "--set", "params.nope=1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn newton_failure_is_a_numerics_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tumorch(&[
        "simulate",
        "--config",
        scenario("default.toml").to_str().unwrap(),
        "--set",
        "time.newton_max_iter=1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    // the manifest is written before stepping
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn simulate_writes_outputs_and_manifest_round_trips_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = tumorch(&[
        "simulate",
        "--config",
        scenario("default.toml").to_str().unwrap(),
        SHORT,
        "--out",
        first.to_str().unwrap(),
        "--snapshot-times",
        "0,0.01",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["manifest.toml", "diagnostics.csv", "final.csv", "snapshot_t0.csv", "snapshot_t0.01.csv"] {
        assert!(first.join(f).exists(), "missing {f}");
    }
    let manifest = std::fs::read_to_string(first.join("manifest.toml")).unwrap();
    assert!(manifest.contains("config_hash"));
    let o = tumorch(&["simulate", "--config", first.join("manifest.toml").to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = std::fs::read(first.join("diagnostics.csv")).unwrap();
    let b = std::fs::read(second.join("diagnostics.csv")).unwrap();
    assert_eq!(a, b);
    let h = |p: &Path| {
        let t: toml::Table = std::fs::read_to_string(p.join("manifest.toml")).unwrap().parse().unwrap();
        t["manifest"]["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(h(&first), h(&second));
}

#[test]
fn stationary_state_is_preserved() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[params]\nchi = 1.0\n[boundary]\nmu_inf = -1.0\nsigma_inf = 1.0\n[initial]\nphi0 = -1.0\nsigma0 = 1.0\n[grid]\nn = [31]\n[time]\ntau = 0.01\nt_end = 0.1\n",
    );
    let out = dir.path().join("out");
    let o = tumorch(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rows = csv::Reader::from_path(out.join("final.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    let col = |n: &str| headers.iter().position(|h| h == n).unwrap();
    let (p, m, s) = (col("phi"), col("mu"), col("sigma"));
    for r in rows.records() {
        let r = r.unwrap();
        let v = |i: usize| r[i].parse::<f64>().unwrap();
        assert!((v(p) + 1.0).abs() < 1e-10 && (v(m) + 1.0).abs() < 1e-10 && (v(s) - 1.0).abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn singular_ctsdep_rejects_mu_inf_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let o = tumorch(&[
        "sweep",
        "ctsdep",
        "--config",
        scenario("obstacle.toml").to_str().unwrap(),
        "--perturb-mu-inf",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("mu_inf"), "{}", stderr(&o));
}

#[test]
fn yosida_sweep_needs_an_obstacle() {
    let dir = tempfile::tempdir().unwrap();
    let o = tumorch(&["sweep", "yosida", "--config", scenario("default.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn identity_sweep_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = tumorch(&["sweep", "identity", "--config", scenario("default.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let verdict = std::fs::read_to_string(dir.path().join("verdict.txt")).unwrap();
    assert!(verdict.starts_with("identity PASS"), "{verdict}");
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn calibrate_writes_caps_for_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let caps = dir.path().join("caps.toml");
    let o = tumorch(&[
        "calibrate",
        "--config",
        scenario("obstacle.toml").to_str().unwrap(),
        "--set",
        "time.t_end=0.05",
        "--out",
        caps.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t: toml::Table = std::fs::read_to_string(&caps).unwrap().parse().unwrap();
    assert_eq!(t["safety_factor"].as_float(), Some(4.0));
    assert!(t["b_cap"].as_float().unwrap() > 0.0);
    assert!(t["r_cap_singular"].as_float().unwrap() > 0.0);
}
