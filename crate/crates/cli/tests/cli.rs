use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn galstab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_galstab"))
        .args(args)
        .current_dir(dir)
        .env_remove("GALSTAB_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn construct_polytrope_meets_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout_json(&galstab(dir.path(), &["construct", "--model", "poly", "--k", "1", "--mass", "1"]));
    assert!((out["casimir_mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let profile = read_json(&dir.path().join("profile.json"));
    assert!((profile["casimir_mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(profile["R_support"].as_f64().unwrap() > 0.0);
    let report = read_json(&dir.path().join("profile.report.json"));
    assert!(report["hamiltonian"].as_f64().unwrap() < 0.0);
}

#[test]
fn construct_plummer_has_unit_central_potential() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout_json(&galstab(dir.path(), &["construct", "--model", "plummer", "--c0", "1"]));
    assert!((out["U_center"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!(out["R_support"].is_null());
}

#[test]
fn exponent_outside_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    for k in ["4", "0", "-1", "3.5"] {
        let out = galstab(dir.path(), &["construct", "--model", "poly", "--k", k]);
        assert_eq!(out.status.code(), Some(2), "k = {k}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
    }
    let out = galstab(dir.path(), &["construct", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scaling_check_reports_the_mass_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout_json(&galstab(dir.path(), &["scaling-check", "--model", "poly", "--k", "1"]));
    let expected = 2f64.powf(7.0 / 3.0);
    assert!((out["ratio"].as_f64().unwrap() / expected - 1.0).abs() < 1e-3);
    let same = stdout_json(&galstab(dir.path(), &["scaling-check", "--k", "1", "--mass2", "1"]));
    assert_eq!(same["ratio"].as_f64().unwrap(), 1.0);
    let pl = stdout_json(&galstab(dir.path(), &["scaling-check", "--model", "plummer", "--lambdas", "0.5,1,2"]));
    assert!(pl["max_relative_H_deviation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn plummer_command_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout_json(&galstab(dir.path(), &["plummer", "--c0", "1"]));
    assert!(out["ode_max_relative_deviation"].as_f64().unwrap() < 1e-6);
    assert!((out["rho_center"].as_f64().unwrap() - 3.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
}

#[test]
fn stability_is_reproducible_and_documented() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        vec!["stability", "--k", "1", "--b", "1.02", "--particles", "2000", "--seed", "7", "--duration", "20", "--cadence", "20", "--name", name]
    };
    let a = stdout_json(&galstab(dir.path(), &args("a")));
    let b = stdout_json(&galstab(dir.path(), &args("b")));
    assert!(a["records"].as_u64().unwrap() >= 200);
    assert_eq!(a["headline_max_m_over_m0"], b["headline_max_m_over_m0"]);
    let ca = std::fs::read(dir.path().join("a.csv")).unwrap();
    let cb = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(ca, cb);
    let header = String::from_utf8(ca).unwrap();
    assert!(header.starts_with("t,H,C,mass,d,field_diff,shift_x,shift_y,shift_z,scale,metric,d_unshifted,field_diff_unshifted,metric_unshifted\n"));
    let manifest = read_json(&dir.path().join("a.manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["profile_sha256"].as_str().unwrap().len(), 64);

    let help = galstab(dir.path(), &["stability", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("metric_unshifted") && text.contains("field_diff"));
}

#[test]
fn constraint_violating_spec_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind": "dilation_ab", "b": 1.1, "a": 1.0}"#).unwrap();
    let out = galstab(dir.path(), &["stability", "--particles", "200", "--seed", "1", "--duration", "0.1", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constraint"));
}

#[test]
fn stochastic_commands_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for args in [vec!["sample", "--particles", "10"], vec!["stability", "--particles", "10"], vec!["simulate", "--particles", "10"]] {
        let out = galstab(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_is_overridden_by_flags_and_env_sets_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"poly\"\nk = 2.0\nmass = 3\nname = \"from_config\"\n").unwrap();
    let out = stdout_json(&galstab(dir.path(), &["construct", "--config", "run.toml", "--mass", "1.5"]));
    assert!((out["casimir_mass"].as_f64().unwrap() - 1.5).abs() < 1e-6);
    assert!(dir.path().join("from_config.json").exists());
    let profile = read_json(&dir.path().join("from_config.json"));
    assert_eq!(profile["model"]["kind"]["k"], 2.0);

    let target = dir.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_galstab"))
        .args(["construct", "--k", "1"])
        .current_dir(dir.path())
        .env("GALSTAB_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("profile.json").exists());

    std::fs::write(&cfg, "[nested]\nk = 1\n").unwrap();
    let out = galstab(dir.path(), &["construct", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_simulate_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&galstab(dir.path(), &["construct", "--k", "1"]));
    let s = stdout_json(&galstab(dir.path(), &["sample", "--profile", "profile.json", "--particles", "3000", "--seed", "4"]));
    assert_eq!(s["particles"], 3000);
    let sim = stdout_json(&galstab(
        dir.path(),
        &["simulate", "--profile", "profile.json", "--snapshot", "sample.snap", "--duration", "2", "--cadence", "40", "--threads", "2"],
    ));
    assert!(sim["max_relative_H_drift"].as_f64().unwrap() < 1e-3);
    let rows = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    assert!(rows.starts_with("t,H,E_kin,E_pot,C,mass\n"));
    assert_eq!(rows.lines().count(), 1 + 1 + 400 / 40);
    let ev = stdout_json(&galstab(dir.path(), &["evaluate", "--profile", "profile.json", "--snapshot", "simulate.final.snap"]));
    assert!(((ev["E_pot_field"].as_f64().unwrap() - ev["E_pot_double"].as_f64().unwrap()) / ev["E_pot_field"].as_f64().unwrap()).abs() < 1e-2);
    let missing = galstab(dir.path(), &["evaluate", "--profile", "nope.json"]);
    assert_eq!(missing.status.code(), Some(2));
}
