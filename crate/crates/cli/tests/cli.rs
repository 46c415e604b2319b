use std::path::Path;
use std::process::{Command, Output};

use torus_lqg::torus_green::green_closed_form;
use torus_lqg::{ComplexUH, QSeriesConfig, TorusPoint};

fn bin(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus-lqg")).args(args).env("TORUS_LQG_CACHE_DIR", cache).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["gmc", "sample", "--gamma", "1", "--bogus-flag", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--bogus-flag"), "{}", stderr(&o));
}

#[test]
fn invalid_parameter_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["green", "eval", "--tau", "0,-1"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn green_eval_prints_library_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["green", "eval", "--tau", "0.2,1.1", "--x", "0.3,0.4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let expected = green_closed_form(ComplexUH::new(0.2, 1.1).unwrap(), TorusPoint::new(0.3, 0.4), QSeriesConfig::default()).unwrap();
    assert!((doc["green"].as_f64().unwrap() - expected).abs() <= 1e-14 * expected.abs());
    assert!(doc["meta"].is_object());
}

#[test]
fn config_file_values_are_used_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[green]\ntau = \"0.1,1.3\"\nx = \"0.25,0.25\"\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = bin(&["--config", cfg, "green", "eval"], dir.path());
    let b = bin(&["--config", cfg, "green", "eval", "--x", "0.4,0.1"], dir.path());
    let get = |o: &Output| serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()["green"].as_f64().unwrap();
    let q = QSeriesConfig::default();
    let t = ComplexUH::new(0.1, 1.3).unwrap();
    let close = |v: f64, x: TorusPoint| {
        let e = green_closed_form(t, x, q).unwrap();
        assert!((v - e).abs() <= 1e-14 * e.abs(), "{v} vs {e}");
    };
    close(get(&a), TorusPoint::new(0.25, 0.25));
    close(get(&b), TorusPoint::new(0.4, 0.1));
}

#[test]
fn reruns_are_identical_apart_from_duration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("masses.csv");
    let args = ["gmc", "sample", "--gamma", "0.8", "--tau", "0,1", "--N", "16", "--replicas", "12", "--seed", "9", "--out", out.to_str().unwrap()];
    assert!(bin(&args, dir.path()).status.success());
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(bin(&args, dir.path()).status.success());
    let second = std::fs::read_to_string(&out).unwrap();
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("# duration_s")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&first), strip(&second));
    assert!(first.starts_with("# {"));
    assert!(first.lines().any(|l| l == "replica_id,total_mass,max_cell_fraction"));
    assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count(), 13);
}

#[test]
fn plot_rejects_empty_input_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("empty.csv");
    std::fs::write(&data, "").unwrap();
    let svg = dir.path().join("out.svg");
    let o = bin(&["lqg", "plot", data.to_str().unwrap(), "--out", svg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!svg.exists());
}

#[test]
fn plot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("green.csv");
    assert!(bin(&["green", "table", "--tau", "0,1", "--grid", "8", "--out", table.to_str().unwrap()], dir.path()).status.success());
    let svg = dir.path().join("line.svg");
    let args = ["lqg", "plot", table.to_str().unwrap(), "--kind", "line", "--x-col", "x2", "--y-col", "green", "--out", svg.to_str().unwrap()];
    assert!(bin(&args, dir.path()).status.success());
    let a = std::fs::read(&svg).unwrap();
    assert!(bin(&args, dir.path()).status.success());
    assert_eq!(a, std::fs::read(&svg).unwrap());
    assert!(String::from_utf8(a).unwrap().contains("<svg"));
}

#[test]
fn quick_acceptance_run_reports_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["check", "all", "--quick"], dir.path());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("criterion")).count(), 15, "{text}");
    assert!(text.contains("FAIL (known)"));
    assert_eq!(o.status.code(), Some(0), "{text}\n{}", stderr(&o));
}
