use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BASE: &str = r#"
[system]
omega_m = 1.0
kappa_lc_over_omega_m = 0.125
Q = 3e6
nbar = 40.0
n0 = 0.1
lambda_t = 1.0
cooperativity = 100.0
upsilon = 2.0

[protocol]
tau1 = 0.8
tau2 = 12.0
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_emech-bell"));
    c.env_remove("EMECH_BELL_OUT");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn validate_passes_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = run(&["--mode", "validate", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value =
        serde_json::from_str(&fs::read_to_string(out.join("validate.json")).unwrap()).unwrap();
    let checks = doc["checks"].as_array().unwrap();
    assert!(checks.len() >= 6);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn zero_coupling_gives_classical_bound() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("cooperativity = 100.0", "g_max = 0.0");
    let cfg = write_config(dir.path(), "zero.toml", &text);
    let out = dir.path().join("o");
    let o = run(&[
        "--mode",
        "single",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value =
        serde_json::from_str(&fs::read_to_string(out.join("single.json")).unwrap()).unwrap();
    let s = doc["rows"][0]["S"].as_f64().unwrap();
    assert!((s - 2.0).abs() < 1e-6, "S = {s}");
}

#[test]
fn single_with_fixed_settings_writes_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}\n[settings]\nalpha1 = [0.0, -0.16]\nalpha2 = [0.0, 0.52]\nbeta1 = [0.0, 0.16]\nbeta2 = [0.0, -0.52]\n"
    );
    let cfg = write_config(dir.path(), "fixed.toml", &text);
    let out = dir.path().join("o");
    let o = run(&[
        "--mode",
        "single",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sched = fs::read_to_string(out.join("pulse_schedule.csv")).unwrap();
    assert_eq!(sched.lines().next(), Some("t,gamma_bs,kappa_c"));
    assert!(sched.lines().count() > 100);
}

#[test]
fn sweep_output_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        format!("{BASE}\n[sweep]\ncooperativity = [40.0, 100.0]\nlambda_t = [1.0]\nn0 = [0.1]\n");
    let cfg = write_config(dir.path(), "sweep.toml", &text);
    let mut csvs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "2")] {
        let out = dir.path().join(name);
        let o = run(&[
            "--mode",
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "3",
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.join("sweep.partial.csv").exists());
        csvs.push((
            fs::read(out.join("sweep.csv")).unwrap(),
            fs::read(out.join("sweep.json")).unwrap(),
        ));
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].0.clone()).unwrap();
    assert!(text.starts_with("# mode=sweep config_sha256="));
    assert!(text.contains("seed=3"));
    let lines = data_lines(&text);
    assert_eq!(
        lines[0],
        "C,lambda_t,n0,S,tau1_Gamma,tau2_Gamma,upsilon,converged"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("40,1,0.1,"));
    assert!(lines[2].starts_with("100,1,0.1,"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env_out");
    let o = bin()
        .args(["--mode", "validate"])
        .env("EMECH_BELL_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("validate.csv").exists());
}

#[test]
fn bad_config_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        &BASE.replace("lambda_t = 1.0", "lambda_t = 1.5"),
    );
    let out = dir.path().join("o");
    let o = run(&[
        "--mode",
        "single",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json error record");
    let rec: Value = serde_json::from_str(line).unwrap();
    assert_eq!(rec["error"]["kind"], "config");
    assert_eq!(rec["error"]["path"], "system.lambda_t");
    assert!(out.join("error.json").exists());
}

#[test]
fn missing_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--mode", "sweep", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("\"error\""));
}
