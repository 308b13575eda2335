use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tslab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn scenario_catalog_is_stable() {
    let a = tslab(&["scenarios"]);
    let b = tslab(&["scenarios"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for name in ["paper-alpha-check", "paper-budget-phoneme", "paper-budget-rl"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn budget_config_reports_pass_and_manifest_exists() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("budget");
    let cfg = write_config(
        tmp.path(),
        "b.json",
        &format!(
            r#"{{"schema_version": 1, "kind": "budget_check", "seed": 3, "output_dir": {:?},
                "parameters": {{"t_star_ms": 10, "forgetting_factor": 0.5, "tau_pre_ms": 20, "tau_m_ms": 20}}}}"#,
            out.to_str().unwrap()
        ),
    );
    let res = tslab(&["run", &cfg]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rep = report(&out);
    for c in rep["details"]["report"]["constraints"].as_array().unwrap() {
        assert_eq!(c["verdict"], "pass");
    }
    assert_eq!(rep["config"]["seed"], 3);
    assert_eq!(rep["library_version"], env!("CARGO_PKG_VERSION"));
    for a in rep["artifacts"].as_array().unwrap() {
        assert!(out.join(a["file"].as_str().unwrap()).is_file());
    }
}

#[test]
fn malformed_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        &format!(r#"{{"schema_version": 1, "kind": "dde_study", "seed": 1, "output_dir": {:?}"#, out.to_str().unwrap()),
    );
    let res = tslab(&["run", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_key_aborts_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let cfg = write_config(
        tmp.path(),
        "strict.json",
        &format!(
            "{{\"schema_version\": 1, \"kind\": \"mc_sweep\", \"seed\": 1, \"output_dir\": {:?},\n\"parameters\": {{\"sizes\": [10], \"ridg\": 1e-8}}}}",
            out.to_str().unwrap()
        ),
    );
    let res = tslab(&["run", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("ridg"), "{err}");
    assert!(!out.exists());
}

#[test]
fn out_of_domain_parameter_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "f.json",
        r#"{"schema_version": 1, "kind": "budget_check", "seed": 1, "output_dir": "unused",
            "parameters": {"forgetting_factor": 1.5}}"#,
    );
    let out = tmp.path().join("o");
    let res = tslab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn diverging_training_exits_with_numeric_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.json",
        r#"{"schema_version": 1, "kind": "eprop_train", "seed": 1, "output_dir": "unused",
            "parameters": {"n_rec": 10, "steps": 50, "epochs": 1, "weight_bound": 0.5}}"#,
    );
    let out = tmp.path().join("o");
    let res = tslab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("eprop_train"), "{err}");
    assert!(!out.exists());
}

#[test]
fn mc_sweep_over_two_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("mc");
    let cfg = write_config(
        tmp.path(),
        "mc.json",
        r#"{"schema_version": 1, "kind": "mc_sweep", "seed": 5, "output_dir": "unused",
            "parameters": {"sizes": [10, 20], "input_length": 4000}}"#,
    );
    let res = tslab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let rep = report(&out);
    let reports = rep["details"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert!(r["report"]["mc_total"].as_f64().unwrap() <= r["n"].as_f64().unwrap() + 0.1);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let res = tslab(&["run", "--scenario", "slowfast-order-check", "--seed", "9", "--out", dir.to_str().unwrap()]);
        assert!(res.status.success());
    }
    let rep = report(&a);
    for art in rep["artifacts"].as_array().unwrap() {
        let f = art["file"].as_str().unwrap();
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn check_budget_command() {
    let pass = tslab(&["check-budget", "--tstar", "10", "--F", "0.5", "--tau-pre", "20", "--tau-m", "20"]);
    assert!(pass.status.success());
    let text = String::from_utf8(pass.stdout).unwrap();
    assert_eq!(text.matches("PASS").count(), 2, "{text}");

    let fail = tslab(&["check-budget", "--tstar", "2000", "--F", "0.5", "--tau-pre", "20", "--tau-m", "20"]);
    assert!(fail.status.success());
    assert_eq!(String::from_utf8(fail.stdout).unwrap().matches("FAIL").count(), 2);
}

#[test]
fn unknown_scenario() {
    let res = tslab(&["run", "--scenario", "does-not-exist", "--out", "/nonexistent/x"]);
    assert_eq!(res.status.code(), Some(2));
}
