use std::path::Path;
use std::process::{Command, Output};

use emden_glue::cli::RunConfig;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_emden-glue"));
    c.env_remove("EMDEN_GLUE_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn radial_reports_the_plateau() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["radial", "--N", "5", "--p", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("profile_report.json"));
    assert_eq!(rep["result"]["v_inf"], 2.0);
    assert_eq!(rep["status"], "ok");
    assert!(rep["version"].as_str().unwrap().starts_with("0.1.0"));
    assert!(rep["tolerances"]["profile_tol"].is_number());
    assert_eq!(rep["config"]["problem"]["N"], 5);
    for f in ["profile.csv", "u1.csv"] {
        assert!(dir.path().join(f).exists());
    }
    let header = std::fs::read_to_string(dir.path().join("u1.csv")).unwrap();
    assert!(header.starts_with("r,u1,u1_prime"));
}

#[test]
fn usage_and_parameter_errors_exit_with_two() {
    let out = run(&["radial", "--N", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let out = run(&["radial", "--N", "5", "--p", "2.4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("supercritical"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"problem": {"N": 3, "p": 4}, "bogus": 1}"#).unwrap();
    let out = run(&["solve", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn a0map_is_positive_on_the_listed_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["a0map", "--N", "5", "--p-grid", "1.8:2.2:5", "--E-grid", "0,0.5,1,2,5,10", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("a0map.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "a0").unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let a0: f64 = rec.unwrap()[col].parse().unwrap();
        assert!(a0 > 0.0);
        rows += 1;
    }
    assert_eq!(rows, 30);
}

#[test]
fn indicial_and_approx_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(run(&["indicial", "--N", "5", "--p", "2", "--out", d]).status.code(), Some(0));
    assert!(dir.path().join("indicial.csv").exists());
    assert_eq!(run(&["approx", "--N", "3", "--p", "4", "--out", d]).status.code(), Some(0));
    let rep = json(&dir.path().join("approx_report.json"));
    let slope = rep["result"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope * 3.0 - 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn solve_then_verify_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::for_problem(3, 4.0);
    let config = write_config(dir.path(), &cfg);
    let out_dir = dir.path().join("run");
    let out = run(&["solve", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&out_dir.join("report.json"));
    assert_eq!(rep["result"]["converged"], true);
    assert!(out_dir.join("trace.csv").exists());

    let report = out_dir.join("report.json");
    let out = run(&["verify", "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // Scale u on every row; the stored v and ū no longer add up.
    let solution = out_dir.join("solution.csv");
    let mut rdr = csv::Reader::from_path(&solution).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let ucol = headers.iter().position(|h| h == "u").unwrap();
    let mut wtr = csv::Writer::from_path(dir.path().join("tampered.csv")).unwrap();
    wtr.write_record(&headers).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let fields: Vec<String> = rec
            .iter()
            .enumerate()
            .map(|(i, f)| if i == ucol { (f.parse::<f64>().unwrap() * 1.5).to_string() } else { f.to_owned() })
            .collect();
        wtr.write_record(&fields).unwrap();
    }
    wtr.flush().unwrap();
    drop(wtr);
    let tampered = dir.path().join("tampered.csv");
    let out = run(&[
        "verify",
        "--report",
        report.to_str().unwrap(),
        "--solution",
        tampered.to_str().unwrap(),
        "--out",
        dir.path().join("v2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("field_consistency"), "{stderr}");
    let vr = json(&dir.path().join("v2/verify_report.json"));
    assert_eq!(vr["status"], "checks_failed");
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["radial", "--N", "4", "--p", "2.5", "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["profile.csv", "u1.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let out = bin()
        .args(["radial", "--N", "5", "--p", "2"])
        .env("EMDEN_GLUE_OUT", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("profile_report.json").exists());
}

#[test]
fn failed_solve_marks_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::for_problem(3, 4.0);
    cfg.picard.max_iter = 2;
    let config = write_config(dir.path(), &cfg);
    let out = run(&["solve", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let rep = json(&dir.path().join("report.json"));
    assert_eq!(rep["status"], "failed");
    assert!(rep["error"].as_str().unwrap().contains("2"));
}
