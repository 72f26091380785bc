use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use evrpnl::model::fixtures::ex1;
use evrpnl::model::random::{random_instance, RandomParams};
use evrpnl::model::Solution;
use evrpnl_cli::{run, EXIT_INFEASIBLE, EXIT_SOLVED, EXIT_USAGE};
use rand::SeedableRng;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("evrpnl").chain(list.iter().copied()).map(String::from).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Directory of small random instances.
fn instance_dir(count: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..count {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut inst = random_instance(&mut rng, &RandomParams { customers: 4, stations: 1, ..Default::default() });
        inst.name = format!("r{seed}");
        fs::write(dir.path().join(format!("r{seed}.json")), inst.to_json()).unwrap();
    }
    dir
}

fn ip_column(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect()
}

#[test]
fn tabu_solution_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("ex1.json");
    fs::write(&inst, ex1(3, 1).to_json()).unwrap();
    let sol = dir.path().join("sol.json");
    let csv = dir.path().join("rows.csv");
    let code = run(args(&[
        "solve", "--mode", "tabu", "--instance", s(&inst), "--seed", "42", "--out", s(&sol), "--csv", s(&csv),
    ]));
    assert_eq!(code, EXIT_SOLVED);
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(rows.lines().nth(1).unwrap().ends_with(",tabu"));
    assert_eq!(run(args(&["validate", "--instance", s(&inst), s(&sol)])), EXIT_SOLVED);

    // a route claiming to be shorter than its replay is rejected
    let mut tampered: Solution = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    tampered.routes[0].duration -= 0.25;
    fs::write(&sol, serde_json::to_string(&tampered).unwrap()).unwrap();
    assert_eq!(run(args(&["validate", "--instance", s(&inst), s(&sol)])), EXIT_INFEASIBLE);
}

#[test]
fn exact_and_both_modes_agree() {
    let dir = instance_dir(1);
    let inst = dir.path().join("r0.json");
    let out = dir.path().join("report.json");
    let sol = dir.path().join("sol.json");
    let code = run(args(&["solve", "--instance", s(&inst), "--mode", "both", "--report", s(&out), "--out", s(&sol)]));
    assert_eq!(code, EXIT_SOLVED);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["optimal"], true);
    assert!(report["pricing"]["calls"].as_u64().unwrap() >= 1);
    let solution: Solution = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    assert!((solution.cost - report["ip_cost"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(args(&["solve"])), EXIT_USAGE);
    assert_eq!(run(args(&["frobnicate"])), EXIT_USAGE);
    assert_eq!(run(args(&["solve", "--instance", "x.json", "--time-limit", "0"])), EXIT_USAGE);
    assert_eq!(run(args(&["solve", "--instance", "x.json", "--mode", "fastest"])), EXIT_USAGE);
    assert_eq!(run(args(&["--help"])), EXIT_SOLVED);
}

#[test]
fn missing_instance_is_an_error() {
    assert_eq!(run(args(&["solve", "--instance", "/nonexistent/x.json"])), EXIT_INFEASIBLE);
}

#[test]
fn converts_benchmark_xml() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tiny.json");
    assert_eq!(run(args(&["convert", "--from", "montoya", s(&data("tiny.xml")), s(&out)])), EXIT_SOLVED);
    let inst = evrpnl::parse_instance(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(inst.name, "tiny");
    assert_eq!((inst.n_customers(), inst.n_stations()), (2, 1));
    assert_eq!(inst.battery, 16000.0);
    // the converted file solves like the original
    let sol = dir.path().join("sol.json");
    assert_eq!(run(args(&["solve", "--instance", s(&out), "--out", s(&sol)])), EXIT_SOLVED);
    assert_eq!(run(args(&["validate", "--instance", s(&data("tiny.xml")), s(&sol)])), EXIT_SOLVED);
}

#[test]
fn bench_writes_one_row_per_instance_and_is_deterministic() {
    let dir = instance_dir(4);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["bench", "--dir", s(dir.path()), "--mode", "exact-bpc", "--time-limit", "600"];
    assert!(run(args(&[&base[..], &["--out", s(&a)]].concat())) <= 1);
    assert!(run(args(&[&base[..], &["--out", s(&b), "--threads", "3"]].concat())) <= 1);
    let (a, b) = (fs::read_to_string(a).unwrap(), fs::read_to_string(b).unwrap());
    assert_eq!(a.lines().count(), 1 + 4 + 1);
    assert!(a.lines().last().unwrap().starts_with("Average"));
    assert_eq!(ip_column(&a), ip_column(&b));
}

#[test]
fn study_linear_reports_every_instance() {
    let dir = instance_dir(2);
    let out = dir.path().join("study.csv");
    let code = run(args(&["study-linear", "--dir", s(dir.path()), "--time-limit", "600", "--out", s(&out)]));
    assert_eq!(code, EXIT_SOLVED);
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("Instance,PWL Cost"));
}

#[test]
fn binary_reports_exit_codes_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("ex1.json");
    fs::write(&inst, ex1(2, 1).to_json()).unwrap();
    let bin = env!("CARGO_BIN_EXE_evrpnl");
    let out = Command::new(bin)
        .args(["solve", "--mode", "tabu", "--seeds", "1", "--trace", "--instance", s(&inst)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_SOLVED));
    let sol: Solution = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol.instance, "ex1-c2-s1");
    let stderr = String::from_utf8(out.stderr).unwrap();
    let first: serde_json::Value = serde_json::from_str(stderr.lines().next().unwrap()).unwrap();
    assert!(first.get("incumbent").is_some() && first.get("tenure").is_some());
    let bad = Command::new(bin).args(["solve", "--bogus"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
