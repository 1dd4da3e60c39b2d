//! End-to-end checks of the command-line driver.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bergerflow"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bergerflow_cli_{}_{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_accepts_the_default_family() {
    let out = bin().args(["validate", "--grid", "257"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("(a) fiber below base   PASS"), "{text}");
    assert!(text.matches("PASS").count() == 5, "{text}");
}

#[test]
fn validate_rejects_bad_parameters() {
    let dir = tmp("badcfg");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "schema = 1\n[seed]\nalpha = 1.2\ndelta = 1.0\n").unwrap();
    let out = bin()
        .args(["validate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("A^2/2"), "{err}");
}

#[test]
fn strict_mode_rejects_unknown_keys() {
    let dir = tmp("strict");
    let cfg = dir.join("typo.cfg");
    fs::write(&cfg, "schema = 1\n[grid]\nnodez = 65\n").unwrap();
    let strict = bin()
        .args(["validate", "--config", cfg.to_str().unwrap(), "--strict"])
        .output()
        .unwrap();
    assert!(!strict.status.success());
    let lenient = bin()
        .args(["validate", "--config", cfg.to_str().unwrap(), "--grid", "257"])
        .output()
        .unwrap();
    assert!(lenient.status.success());
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("unknown key"));
}

#[test]
fn run_writes_outputs_and_resume_matches() {
    let dir = tmp("run");
    let cfg_path = dir.join("run.cfg");
    fs::write(
        &cfg_path,
        "schema = 1\n[grid]\nnodes = 129\n[stepping]\nmu_stop_fraction = 0.4\nremesh_ratio = 2.0\n[output]\nfloat_format = hex\n",
    )
    .unwrap();
    let out_a = dir.join("a");
    let status = bin()
        .args([
            "run",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out_a.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["series.csv", "snapshots.json", "run_summary.json", "manifest.json", "checkpoint.json"] {
        assert!(out_a.join(name).exists(), "{name} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], serde_json::Value::Bool(true));

    // resuming the completed checkpoint replays the bookkeeping unchanged
    let out_b = dir.join("b");
    let status = bin()
        .args([
            "run",
            "--resume",
            out_a.join("checkpoint.json").to_str().unwrap(),
            "--out",
            out_b.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let a = fs::read(out_a.join("series.csv")).unwrap();
    let b = fs::read(out_b.join("series.csv")).unwrap();
    assert_eq!(a, b, "resumed series differs");
}

#[test]
fn soliton_subcommand_reports_residuals() {
    let dir = tmp("sol");
    let out = bin()
        .args(["soliton", "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("soliton.csv").exists());
    assert!(dir.join("soliton_residuals.json").exists());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("soliton_residuals.json")).unwrap())
            .unwrap();
    assert!(doc["ode"]["res1_max"].as_f64().unwrap() < 1e-12);
}
