use std::fs;
use std::path::Path;
use std::process::Command;

use holoqd_cli::{parse_config, run, EXIT_CONFIG, EXIT_OK, EXIT_PHYSICS};

fn config_in(dir: &Path, body: &str) -> holoqd_cli::RunConfig {
    let text = format!("out_dir = {:?}\n{body}", dir.display().to_string());
    parse_config(&text).unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn sweep_gamma_nine_rows_with_plateau() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(
        tmp.path(),
        "scenario = \"sweep-gamma\"\ntau0_over_tau = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]\n",
    );
    assert_eq!(run(&cfg), EXIT_OK);
    let csv = fs::read_to_string(tmp.path().join("sweep_gamma.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "tau0_over_tau,gamma_f_rad,gamma_f_over_pi,quad_err"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][1], 0.0);
    for r in &rows[7..] {
        assert!((r[2] - 0.25).abs() < 1e-3, "{r:?}");
    }
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["tau"], 100.0);
}

#[test]
fn csv_output_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let cfg = config_in(dir, "scenario = \"sweep-beta\"\n");
        assert_eq!(run(&cfg), EXIT_OK);
    }
    let read = |d: &Path| fs::read(d.join("sweep_beta.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn every_output_is_listed_in_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(
        tmp.path(),
        "scenario = \"readout\"\nreadout_p0 = 0.0\nreadout_p1 = 1.0\n",
    );
    assert_eq!(run(&cfg), EXIT_OK);
    let m = manifest(tmp.path());
    let listed: Vec<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    let csv = fs::read_to_string(tmp.path().join("readout.csv")).unwrap();
    let photons: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((photons - 2.0).abs() < 0.1);
}

#[test]
fn init_csv_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(
        tmp.path(),
        "scenario = \"init\"\ninit_duration = 2000.0\ninit_stride = 100.0\n",
    );
    assert_eq!(run(&cfg), EXIT_OK);
    let csv = fs::read_to_string(tmp.path().join("init.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_ps,rho00,rho11,rho_aa,rho_e1e1,rho_e2e2,fidelity"
    );
    assert_eq!(lines.count(), 21);
}

#[test]
fn gate_scenario_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path(), "scenario = \"gate\"\ngate = \"y_closed_loop\"\n");
    assert_eq!(run(&cfg), EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("gate_report.json")).unwrap()).unwrap();
    assert_eq!(report["variant"], "y_closed_loop");
    assert!(report["fidelity"].as_f64().unwrap() > 0.99);
    assert_eq!(
        fs::read_to_string(tmp.path().join("gate.csv")).unwrap().lines().count(),
        3
    );
}

#[test]
fn leaky_gate_reports_failed_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path(), "scenario = \"gate\"\ngate = \"z_fractional\"\n");
    assert_eq!(run(&cfg), EXIT_PHYSICS);
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "check_failed");
    assert!(m["notes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("leakage")));
}

#[test]
fn missing_scenario_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path(), "");
    assert_eq!(run(&cfg), EXIT_CONFIG);
    assert_eq!(manifest(tmp.path())["status"], "config_error");
}

#[test]
fn binary_rejects_unknown_key_and_still_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, "foo = 3\n").unwrap();
    let out = tmp.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_holoqd"))
        .args(["sweep-gamma", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
    let m = manifest(&out);
    assert!(m["error"].as_str().unwrap().contains("foo"));
}

#[test]
fn binary_runs_sweep_with_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_holoqd"))
        .args(["sweep-beta", "--threads", "2", "--seed", "7", "--out"])
        .arg(&out)
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let m = manifest(&out);
    assert_eq!(m["config"]["threads"], 2);
    assert_eq!(m["config"]["seed"], 7);
    assert!(out.join("sweep_beta.csv").exists());
}

#[test]
fn validate_suite_runs_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path(), "scenario = \"validate\"\n");
    let code = run(&cfg);
    let m = manifest(tmp.path());
    let checks = m["checks"].as_array().unwrap();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(code, if failed.is_empty() { EXIT_OK } else { EXIT_PHYSICS });
    assert!(checks.len() > 30);
    // the y protocols are adiabatic at the defaults
    assert!(failed.iter().all(|n| !n.starts_with("y_")), "{failed:?}");
    let csv = fs::read_to_string(tmp.path().join("validate.csv")).unwrap();
    assert_eq!(csv.lines().count(), checks.len() + 1);
}
