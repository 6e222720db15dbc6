//! End-to-end tests of the binary: output shape, exit codes, config files,
//! and reproducibility headers.

use std::path::Path;
use std::process::Command;

fn roughbel() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roughbel"))
}

fn run_ok(args: &[&str]) -> String {
    let out = roughbel().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8")
}

#[test]
fn kernel_table_emits_expected_columns() {
    let text = run_ok(&["kernel-table", "--h", "0.1", "--n", "6"]);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# roughbel"));
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    assert!(lines.next().unwrap().starts_with("# seed="));
    assert!(lines.next().unwrap().starts_with("# config="));
    assert_eq!(lines.next().unwrap(), "t,s,K,dK_dt,R");
    let first = lines.next().unwrap();
    assert_eq!(first.split(',').count(), 5);
}

#[test]
fn sample_paths_single_and_multi() {
    let single = run_ok(&["sample-paths", "--steps", "4", "--seed", "1"]);
    assert!(single.lines().any(|l| l == "t,B,BH,W,mixed"));
    let multi = run_ok(&["sample-paths", "--steps", "4", "--seed", "1", "--paths", "2"]);
    assert!(multi.lines().any(|l| l == "path,t,B,BH,W,mixed"));
}

#[test]
fn solve_reports_first_variation_column() {
    let text = run_ok(&[
        "solve", "--drift", "linear:0.5", "--steps", "8", "--x0", "0.3",
    ]);
    assert!(text.lines().any(|l| l == "t,X,J"));
    // J starts at 1
    let first_row = text.lines().find(|l| l.starts_with("0,")).unwrap();
    assert!(first_row.ends_with(",1"));
}

#[test]
fn greeks_csv_schema() {
    let text = run_ok(&[
        "greeks", "--model", "sde", "--estimator", "both", "--paths", "64", "--steps", "16",
        "--payoff", "square",
    ]);
    assert!(text
        .lines()
        .any(|l| l == "component,estimator,value,std_error,n_paths,runtime_ms"));
    assert!(text.lines().any(|l| l.starts_with("delta_x,bel,")));
    assert!(text.lines().any(|l| l.starts_with("delta_x,fd,")));
}

#[test]
fn greeks_json_has_hash_and_results() {
    let text = run_ok(&[
        "greeks", "--model", "stock", "--preset", "bs", "--estimator", "fd", "--paths", "32",
        "--steps", "8", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&text).expect("valid json");
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 16);
    assert_eq!(v["results"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes_for_config_errors() {
    for args in [
        vec!["greeks", "--model", "bogus"],
        vec!["greeks", "--estimator", "bogus"],
        vec!["stability", "--p", "3"],
        vec!["stability", "--gaps", "0.1,0.2,0.3"],
        vec!["sample-paths", "--mix", "scaled:0,1"],
        vec!["kernel-table", "--h", "0.7"],
        vec!["validate", "--suite", "bogus"],
    ] {
        let out = roughbel().args(&args).output().expect("spawn");
        assert_eq!(
            out.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn validate_small_suites_pass() {
    for suite in ["greeks", "stability"] {
        let out = roughbel()
            .args(["validate", "--suite", suite])
            .output()
            .expect("spawn");
        assert_eq!(out.status.code(), Some(0), "suite {suite}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("0 failed"), "{text}");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "steps = 8\nseed = 123\nh = 0.12\n").unwrap();
    let text = run_ok(&[
        "sample-paths",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "4",
    ]);
    let config_line = text.lines().find(|l| l.starts_with("# config=")).unwrap();
    assert!(config_line.contains("steps=4"), "{config_line}"); // flag wins
    assert!(config_line.contains("seed=123"), "{config_line}"); // file value
    assert!(config_line.contains("h=0.12"), "{config_line}");
}

#[test]
fn out_dir_env_var_redirects_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = roughbel()
        .args(["sample-paths", "--steps", "4", "--out", "paths.csv"])
        .env("ROUGHBEL_OUT_DIR", dir.path())
        .output()
        .expect("spawn");
    assert!(out.status.success());
    assert!(Path::new(&dir.path().join("paths.csv")).exists());
}

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let f1 = dir.path().join("a.csv");
    let f2 = dir.path().join("b.csv");
    for f in [&f1, &f2] {
        let out = roughbel()
            .args([
                "sample-paths", "--steps", "32", "--seed", "5", "--paths", "3", "--mix",
                "correlated:-0.3", "--out",
            ])
            .arg(f)
            .output()
            .expect("spawn");
        assert!(out.status.success());
    }
    let a = std::fs::read(&f1).unwrap();
    let b = std::fs::read(&f2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncation_warning_reaches_stderr() {
    // start far below the threshold with unequal slopes and a tiny cap so
    // the clamp must fire
    let out = roughbel()
        .args([
            "solve", "--drift", "regime:5.0,1.0,0,0,50", "--mix", "scaled:1,1", "--steps", "8",
            "--x0", "30",
        ])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("truncation"), "stderr: {err}");
}
