use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn elliptic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elliptic"))
        .args(args)
        .env_remove("ELLIPTIC_LOG")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).expect("summary.json written");
    serde_json::from_str(&text).expect("summary.json parses")
}

fn assert_schema(v: &Value) {
    let schema: Value =
        serde_json::from_str(include_str!("../docs/summary.schema.json")).expect("schema parses");
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}\n{v:#}");
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full = vec!["--out", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    elliptic(&full)
}

#[test]
fn catalog_lists_every_entry() {
    for args in [&["catalog"][..], &["catalog", "list"][..]] {
        let out = elliptic(args);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        for name in ["gelfand", "affine", "logistic", "power", "asym_neg", "constant"] {
            assert!(text.lines().any(|l| l.starts_with(&format!("{name}:"))), "{name} missing:\n{text}");
        }
        assert!(text.contains("param p"));
        assert!(text.contains("meta {"));
    }
}

#[test]
fn invalid_configuration_exits_2_with_all_messages() {
    let out = elliptic(&["--n", "2", "--dim", "5", "mp", "--problem", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("n: must be at least 3"), "{err}");
    assert!(err.contains("dim: must be 1 or 2"), "{err}");
    assert!(err.contains("unknown catalog entry `nope`"), "{err}");
}

#[test]
fn unknown_parameter_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["solve-monotone", "--problem", "power", "--param", "q=2"]);
    assert_eq!(out.status.code(), Some(1));
    let s = summary(dir.path());
    assert_eq!(s["status"], "failed");
    assert_eq!(s["error"], "InvalidInput");
    assert_schema(&s);
}

#[test]
fn gelfand_branch_writes_diagram_and_fold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--n", "100", "branch", "--problem", "gelfand"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_schema(&s);
    assert_eq!(s["termination"], "fold");
    let lstar = s["lambda_star"].as_f64().unwrap();
    assert!((lstar - 3.5138).abs() < 5e-3, "{lstar}");

    let csv = std::fs::read_to_string(dir.path().join("diagram.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,sup_norm,l2_norm,lambda1_lin,tag,arclength"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len() as u64, s["n_points"].as_u64().unwrap());
    assert!(rows.iter().all(|r| r.len() == 6 && r[4] == "stable"));
}

#[test]
fn arclength_branch_passes_the_fold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--n", "100", "branch", "--problem", "gelfand", "--arclength", "--lambda-min", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_schema(&s);
    assert_eq!(s["termination"], "lambda_min");
    let csv = std::fs::read_to_string(dir.path().join("diagram.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.split(',').nth(4) == Some("unstable")));
}

#[test]
fn affine_branch_runs_to_the_asymptote() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--n", "100", "branch", "--problem", "affine"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_schema(&s);
    assert_eq!(s["termination"], "asymptote");
    assert!(s.get("lambda_star").is_none());
}

#[test]
fn mountain_pass_without_geometry_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--n", "50", "mp", "--problem", "affine", "--lambda", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: NoMountainGeometry:"), "{err}");
    let s = summary(dir.path());
    assert_schema(&s);
    assert_eq!(s["status"], "failed");
    assert_eq!(s["error"], "NoMountainGeometry");
}

#[test]
fn every_command_summary_matches_schema() {
    let runs: &[&[&str]] = &[
        &["--n", "60", "eig"],
        &["--n", "8", "--dim", "2", "eig", "--shift", "1.5"],
        &["--n", "60", "solve-monotone", "--problem", "logistic", "--param", "c=2*lambda1", "--direction", "sub"],
        &["--n", "60", "mp", "--problem", "power", "--param", "p=3"],
        &["--n", "60", "mp", "--problem", "gelfand", "--lambda", "2", "--second"],
    ];
    for args in runs {
        let dir = tempfile::tempdir().unwrap();
        let out = run_in(dir.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let s = summary(dir.path());
        assert_schema(&s);
        assert_eq!(s["status"], "ok");
    }
}

#[test]
fn second_solution_writes_both_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--n", "60", "mp", "--problem", "gelfand", "--lambda", "2", "--second"]);
    assert!(out.status.success());
    let s = summary(dir.path());
    assert_eq!(s["ordering_ok"], true);
    assert!(s["sup_norm"].as_f64().unwrap() > s["minimal_sup_norm"].as_f64().unwrap());
    assert!(dir.path().join("saddle.csv").exists());
    assert!(dir.path().join("minimal.csv").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n = 40\nproblem = power\nparam.p = 3\nlambda = 0.5*lambda1\n").unwrap();
    let out = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "--n", "30", "mp"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["n"], 30);
    assert_eq!(s["problem"], "power");
    let ratio = s["lambda"].as_f64().unwrap() / s["lambda1"].as_f64().unwrap();
    assert!((ratio - 0.5).abs() < 1e-15);

    std::fs::write(&cfg, "n = 40\nfoo = 1\n").unwrap();
    let out = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "eig"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `foo`"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let runs: &[(&[&str], &[&str])] = &[
        (&["--n", "80", "branch", "--problem", "gelfand", "--arclength", "--lambda-min", "1"], &["diagram.csv"]),
        (&["--n", "80", "mp", "--problem", "gelfand", "--lambda", "2", "--second"], &["saddle.csv", "minimal.csv"]),
    ];
    for (args, files) in runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(run_in(a.path(), args).status.success());
        assert!(run_in(b.path(), args).status.success());
        for f in files.iter().chain(&["summary.json"]) {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert!(x == y, "{f} differs between runs of {args:?}");
        }
    }
}
