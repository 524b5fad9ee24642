use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uhdgof::data::write_csv;
use uhdgof::nulldist::TABLE_HEADER;
use uhdgof::simlab::{gen_study1, Model, Scenario};

fn uhdgof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uhdgof"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn test_subcommand_writes_a_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("h11.csv");
    let json = dir.path().join("report.json");
    let d = gen_study1(&Scenario::new(Model::H11, 0.5, 200, 30, 0.0, 5)).unwrap();
    write_csv(&d, &data).unwrap();

    let out = uhdgof(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--response",
        "y",
        "--method",
        "hybrid-cf",
        "--seed",
        "5",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("p-value"));

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let p = report["pvalue"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);
    assert_eq!(report["method"], "hybrid_cf");
    assert_eq!(report["n"], 200);
    let terms = report["per_projection"].as_array().unwrap();
    let total: f64 = terms.iter().map(|t| t["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for key in ["statistic", "d_hat_1", "d_hat_2", "dropped_projections", "seed", "split_checksum"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn quadratic_expansion_of_the_crime_fixture() {
    let out = uhdgof(&[
        "test",
        "--data",
        fixture("crime_standin.csv").to_str().unwrap(),
        "--response",
        "ViolentCrimesPerPop",
        "--method",
        "tcvm-c",
        "--expand",
        "quadratic",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("quadratic expansion: 5049 columns"), "{text}");
    assert!(text.contains("p = 5049"), "{text}");
}

#[test]
fn binomial_fixture_runs_in_general_mode() {
    let out = uhdgof(&[
        "test",
        "--data",
        fixture("binary_standin.csv").to_str().unwrap(),
        "--response",
        "status",
        "--family",
        "binomial",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("general mode"));
}

#[test]
fn simulate_writes_rows_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cell.csv");
    let args = [
        "simulate", "--study", "1", "--model", "H11", "--n", "80", "--p", "12", "--a", "1",
        "--method", "tcvm-c", "--reps", "50", "--seed", "9", "--out",
    ];
    let mut full: Vec<&str> = args.to_vec();
    full.push(out_path.to_str().unwrap());
    let out = uhdgof(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    full.push("--append");
    assert!(uhdgof(&full).status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "model,rho,n,p,a,method,reps,rate,se");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    assert!(lines[1].starts_with("H11,0.0,80,12,1.0,tcvm-c,50,"), "{}", lines[1]);
    assert!(dir.path().join("cell.reps.csv").exists());
}

#[test]
fn null_table_has_the_versioned_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("null.txt");
    let out = uhdgof(&["null-table", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(TABLE_HEADER));
    assert!(text.lines().count() > 1000);
}

#[test]
fn bad_invocations_fail() {
    assert!(!uhdgof(&["test", "--response", "y"]).status.success());
    assert!(!uhdgof(&["test", "--data", "/nonexistent.csv", "--response", "y"]).status.success());
    assert!(!uhdgof(&["frobnicate"]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.csv");
    let mismatch = uhdgof(&[
        "simulate", "--study", "2", "--model", "H11", "--n", "100", "--p", "20", "--reps", "2",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("does not belong"));
    assert!(!out_path.exists());
}
