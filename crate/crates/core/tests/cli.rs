use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bsde(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsde"))
        .args(args)
        .current_dir(cwd)
        .env_remove("BSDE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const ZERO: &str = r#"
fixture = "zero_driver"
checks = ["residual", "oracle"]

[grid]
steps = 16

[ensemble]
paths = 4096
seed = 3
"#;

#[test]
fn zero_driver_run_succeeds_and_starts_at_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", ZERO);
    let out = tmp.path().join("out");
    let o = bsde(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS residual"));
    let mut rows = csv::Reader::from_path(out.join("solution.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    assert_eq!(&headers[0], "t");
    let first = rows.records().next().unwrap().unwrap();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    assert!(first[1].parse::<f64>().unwrap().abs() < 0.05, "{first:?}");
    for f in ["config.toml", "manifest.json", "checks.json", "picard_report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn failed_check_exits_one() {
    let tmp = TempDir::new().unwrap();
    let body = format!("{ZERO}\n[tolerances]\nresidual = 1e-9\n");
    let cfg = write_config(tmp.path(), "strict.toml", &body);
    let out = tmp.path().join("out");
    let o = bsde(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL residual"));
    assert!(out.join("checks.json").exists());
}

#[test]
fn ladder_run_reports_decreasing_distances() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ladder.toml", "fixture = \"example3\"\nchecks = [\"ladder\"]\n");
    let out = tmp.path().join("out");
    let o = bsde(
        &["run", &cfg, "--paths", "4096", "--steps", "32", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(out.join("l1_report.json")).unwrap()).unwrap();
    assert_eq!(rep["monotone"], true);
    let d: Vec<f64> = rep["s_beta_distances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(d.len(), 3);
    assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
}

#[test]
fn config_errors_exit_two_without_writing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    for (name, body) in [
        ("missing.toml", "[grid]\nsteps = 8\n"),
        ("unknown.toml", "fixture = \"nonexistent\"\n"),
        ("typo.toml", "fixture = \"zero_driver\"\n[grid]\nstepz = 8\n"),
        ("mismatch.toml", "fixture = \"zero_driver\"\nchecks = [\"ladder\"]\n"),
    ] {
        let cfg = write_config(tmp.path(), name, body);
        let o = bsde(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
        assert_eq!(code(&o), 2, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name}");
    }
    let o = bsde(&["run", tmp.path().join("absent.toml").to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2);
    assert_eq!(code(&bsde(&["assumptions", "nonexistent"], tmp.path())), 2);
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", ZERO);
    let env_dir = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_bsde"))
        .args(["run", &cfg])
        .current_dir(tmp.path())
        .env("BSDE_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(env_dir.join("manifest.json").exists());
    assert!(!tmp.path().join("bsde-out").exists());
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", ZERO);
    let mut dirs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = bsde(&["--threads", threads, "run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
        assert_eq!(code(&o), 0);
        dirs.push(out);
    }
    let mut names: Vec<_> = fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for n in names {
        assert_eq!(fs::read(dirs[0].join(&n)).unwrap(), fs::read(dirs[1].join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn assumption_reports() {
    let tmp = TempDir::new().unwrap();
    let o = bsde(&["assumptions", "example1", "--samples", "5000"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for a in ["H1 ", "H2 ", "H3 ", "H4 ", "H5 "] {
        let line = text.lines().find(|l| l.starts_with(a)).unwrap();
        assert!(line.contains("pass"), "{line}");
    }
    assert!(text.lines().any(|l| l.starts_with("H6") && l.contains("not-claimed")));

    let json = tmp.path().join("ex4.json");
    let o = bsde(&["assumptions", "example4", "--samples", "5000", "--json", json.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    let passed: Vec<&str> = rep["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["status"] == "pass")
        .map(|e| e["assumption"].as_str().unwrap())
        .collect();
    assert_eq!(passed.len(), 6, "{passed:?}");

    let json = tmp.path().join("broken.json");
    let o = bsde(&["assumptions", "broken_increasing", "--json", json.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    let h4 = rep["entries"].as_array().unwrap().iter().find(|e| e["status"] == "fail").unwrap();
    assert!(h4["witness"].is_object(), "{h4}");
}

#[test]
fn lists_every_fixture() {
    let tmp = TempDir::new().unwrap();
    let o = bsde(&["list-fixtures"], tmp.path());
    assert_eq!(code(&o), 0);
    let names: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    for n in ["example1", "example2", "example3", "example4", "zero_driver", "linear_oracle"] {
        assert!(names.iter().any(|x| x == n), "{n}");
    }
}
