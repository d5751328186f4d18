use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cutoff"));
    c.env_remove("CUTOFF_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares stdout with `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, &out.stdout).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(expected == out.stdout, "{name} differs from golden output");
}

#[test]
fn golden_params() {
    check_golden("params_d10_alpha1.json", &["params", "--d", "10", "--alpha", "1"]);
    check_golden("params_d3_m1.csv", &["params", "--d", "3", "--m", "1", "--format", "csv"]);
}

#[test]
fn golden_distance() {
    check_golden("distance_d10_m0.9.json", &["distance", "--d", "10", "--m", "0.9", "--t", "1", "--x0", "3"]);
}

#[test]
fn golden_scan() {
    check_golden("scan_alpha1.csv", &["scan", "--alpha", "1", "--dims", "100,1000,10000,100000,1000000"]);
    check_golden("scan_m2.json", &["scan", "--m", "2", "--dims", "100,1000,10000", "--format", "json"]);
}

#[test]
fn golden_sample() {
    check_golden("sample_d3_m1.5.csv", &["sample", "--d", "3", "--m", "1.5", "--n", "5", "--x0", "1", "--seed", "7"]);
}

#[test]
fn golden_pde() {
    check_golden(
        "pde_line_m1.5.csv",
        &["pde", "--m", "1.5", "--x0", "1", "--extent", "4", "--cells", "200", "--t-end", "0.3", "--times", "0.1"],
    );
}

#[test]
fn golden_verify_moments() {
    check_golden("verify_moments_seed42.json", &["verify", "moments", "--seed", "42"]);
}

#[test]
fn params_examples() {
    let out = run(&["params", "--d", "10", "--alpha", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["m"].as_f64().unwrap() - 0.9).abs() < 1e-15);
    let out = run(&["params", "--d", "3", "--m", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["alpha"].as_f64(), Some(0.5));
    assert_eq!(v["regime"], "gaussian");
}

#[test]
fn second_moment_gate() {
    let out = run(&["params", "--d", "2", "--m", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m > d/(d+2)"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["scan", "--alpha", "1", "--dims", ""],
        vec!["scan", "--alpha", "1", "--m", "2"],
        vec!["scan", "--alpha", "1", "--sides", "sideways"],
        vec!["scan", "--alpha", "1", "--eps", "1.5"],
        vec!["params", "--d", "3"],
        vec!["distance", "--d", "3", "--m", "1", "--t", "-1"],
        vec!["verify", "nonsense"],
        vec!["sample", "--d", "3", "--m", "0.2", "--n", "4"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn empty_dims_from_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.json");
    std::fs::write(&cfg, r#"{"alpha": 1, "dims": []}"#).unwrap();
    let out = run(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_fills_missing_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    std::fs::write(&cfg, r#"{"d": 10, "alpha": 1, "format": "csv"}"#).unwrap();
    let from_file = run(&["params", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success());
    assert!(String::from_utf8_lossy(&from_file.stdout).starts_with("key,value\nd,10\n"));
    let overridden = run(&["params", "--config", cfg.to_str().unwrap(), "--d", "20", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(v["d"], 20);
}

#[test]
fn out_flag_writes_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let args = ["scan", "--alpha", "0.25", "--dims", "100,1000,10000"];
    let stdout = run(&args).stdout;
    let mut with_out: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap();
    with_out.extend(["--out", p]);
    let out = run(&with_out);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
}

#[test]
fn scan_csv_shape() {
    let out = run(&["scan", "--alpha", "1", "--dims", "100,1000,10000", "--metrics", "w2_sq,fisher"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,side,eps,t,metric,sup_dist,x0_norm");
    // 3 dims × 2 sides × 2 metrics, then the summary
    assert_eq!(lines.len(), 1 + 12 + 1);
    let summary: serde_json::Value = serde_json::from_str(lines[13].strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(summary["trends"].as_array().unwrap().len(), 4);
    assert_eq!(summary["trends"][0]["fit"]["verdict"], "diverges");
}

#[test]
fn output_independent_of_thread_count() {
    let args = ["sample", "--d", "2", "--m", "0.9", "--n", "9000", "--seed", "3"];
    let one = bin().args(args).arg("--threads").arg("1").output().unwrap();
    let four = bin().args(args).env("CUTOFF_THREADS", "4").output().unwrap();
    assert!(one.status.success() && four.status.success());
    assert!(one.stdout == four.stdout);
}

#[test]
fn bad_thread_env_is_usage_error() {
    let out = bin().args(["params", "--d", "3", "--m", "1"]).env("CUTOFF_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_header_and_rows() {
    let out = run(&["sample", "--d", "4", "--alpha", "1", "--n", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,x_1,x_2,x_3,x_4");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("2,"));
}

#[test]
fn pde_csv_columns() {
    let out = run(&["pde", "--m", "1.5", "--x0", "1", "--extent", "4", "--cells", "200", "--t-end", "0.3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,cell_center,value"));
    // initial and final snapshot
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 200);
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert!(summary["max_entropy_increase"].as_f64().unwrap() <= 0.0);
}

#[test]
fn pde_too_coarse_is_usage_error() {
    let out = run(&["pde", "--m", "0.7", "--x0", "2", "--cells", "64"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution"));
}

#[test]
fn distance_large_time_vanishes() {
    let out = run(&["distance", "--d", "5", "--m", "1.2", "--t", "60", "--x0", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["w2_sq", "entropy", "fisher"] {
        assert!(v[k].as_f64().unwrap() < 1e-20, "{k}");
    }
}
