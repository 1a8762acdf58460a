use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bosonic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bosonic"))
        .current_dir(dir)
        .env_remove("BOSONIC_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn enumerate_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (args, count) in [(["4", "4", "1"], 28), (["4", "3", "3"], 20), (["4", "3", "2"], 19)] {
        let o = bosonic(dir.path(), &["enumerate", "-m", args[0], "-n", args[1], "--depth", args[2], "--json"]);
        assert_eq!(o.status.code(), Some(0));
        let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(doc["count"], count);
        assert_eq!(doc["closed_form"], count.to_string());
        assert_eq!(doc["patterns"].as_array().unwrap().len(), count);
    }
}

#[test]
fn enumerate_rejects_bad_sector() {
    let dir = tempfile::tempdir().unwrap();
    let o = bosonic(dir.path(), &["enumerate", "-m", "4", "-n", "2", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn qubo_reference_reaches_minimum_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let o = bosonic(
        dir.path(),
        &["--output", "a", "solve-qubo", "--builtin", "6", "--depth", "2", "--exact", "--iterations", "30"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json_file(&dir.path().join("a/qubo_result.json"));
    assert!((doc["result"]["E_min"].as_f64().unwrap() + 7.9240876).abs() < 1e-9);
    assert_eq!(doc["result"]["config"]["master_seed"], 0);
    let curves = fs::read_to_string(dir.path().join("a/qubo_curves.csv")).unwrap();
    assert!(curves.starts_with("config_tag,iteration,energy,best_energy"));

    let o = bosonic(dir.path(), &["--output", "b", "solve-qubo", "--builtin", "6", "--config", "a/qubo_result.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("a/qubo_result.json")).unwrap(),
        fs::read(dir.path().join("b/qubo_result.json")).unwrap()
    );
}

#[test]
fn sampled_runs_are_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        ["--output", out, "solve-qubo", "--builtin", "6", "--samples", "32", "--iterations", "10", "--seed", "5"]
    };
    assert_eq!(bosonic(dir.path(), &args("x")).status.code(), Some(0));
    assert_eq!(bosonic(dir.path(), &args("y")).status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("x/qubo_result.json")).unwrap(),
        fs::read(dir.path().join("y/qubo_result.json")).unwrap()
    );
}

#[test]
fn qubo_from_csv_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("q.csv"), "-1,2\n2,-1\n").unwrap();
    let o = bosonic(dir.path(), &["solve-qubo", "--matrix", "q.csv", "--exact", "--iterations", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let doc = json_file(&dir.path().join("qubo_result.json"));
    assert_eq!(doc["result"]["E_min"].as_f64(), Some(-1.0));

    let o = bosonic(dir.path(), &["solve-qubo", "--matrix", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    fs::write(dir.path().join("bad.csv"), "1,2\n2,x\n").unwrap();
    let o = bosonic(dir.path(), &["solve-qubo", "--matrix", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    assert!(err.contains("bad.csv") && err.contains("row 2"), "{err}");
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bosonic"))
        .current_dir(dir.path())
        .env("BOSONIC_OUTPUT_DIR", "envout")
        .args(["solve-qubo", "--builtin", "6", "--iterations", "3"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("envout/qubo_result.json").exists());
}

#[test]
fn mobius_embeds_analytic_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = bosonic(
        dir.path(),
        &["solve-mobius", "--n", "8", "--ja", "0.5", "--jb", "-0.2", "--exact", "--iterations", "40"],
    );
    assert_eq!(o.status.code(), Some(0));
    let doc = json_file(&dir.path().join("mobius_result.json"));
    let analytic = doc["analytic_min"].as_f64().unwrap();
    assert!((analytic + 3.2).abs() < 1e-12);
    assert!((doc["result"]["E_min"].as_f64().unwrap() - analytic).abs() < 1e-12);
    let curves = fs::read_to_string(dir.path().join("mobius_curves.csv")).unwrap();
    let tags: std::collections::BTreeSet<&str> = curves.lines().skip(1).map(|l| l.split('"').nth(1).unwrap()).collect();
    assert_eq!(tags.len(), 4);
}

#[test]
fn mobius_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let odd = bosonic(dir.path(), &["solve-mobius", "--n", "7", "--ja", "0.5", "--jb", "-0.2"]);
    assert_eq!(odd.status.code(), Some(2));
    let zero = bosonic(dir.path(), &["solve-mobius", "--n", "8", "--ja", "0", "--jb", "-0.2"]);
    assert_eq!(zero.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&zero.stderr).contains("out of validity"));
}

#[test]
fn portfolio_frontier_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let o = bosonic(
        dir.path(),
        &[
            "solve-portfolio",
            "--synthetic",
            "6",
            "--gamma",
            "0.5,1,2",
            "--exact",
            "--iterations",
            "40",
            "--baseline",
            "100",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let frontier = fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    assert!(frontier.starts_with("gamma,risk,return,bitstring"));
    assert_eq!(frontier.lines().count(), 4);
    assert_eq!(fs::read_to_string(dir.path().join("baseline.csv")).unwrap().lines().count(), 101);
    for g in ["0.5", "1", "2"] {
        let doc = json_file(&dir.path().join(format!("portfolio_gamma_{g}.json")));
        assert!(doc["result"]["config"].is_object());
    }
}

#[test]
fn portfolio_default_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let o = bosonic(
        dir.path(),
        &["solve-portfolio", "--synthetic", "4", "--exact", "--iterations", "5", "--baseline", "0"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("portfolio_gamma_1.json").exists());
    assert!(!dir.path().join("baseline.csv").exists());
}

#[test]
fn portfolio_price_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.csv"), "date,A,B\nd1,1,2\nd2,-1,2\nd3,1.1,2.2\n").unwrap();
    let o = bosonic(dir.path(), &["solve-portfolio", "--prices", "p.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"));
}

#[test]
fn lattice_exports() {
    let dir = tempfile::tempdir().unwrap();
    let o = bosonic(dir.path(), &["lattice", "--mu", "2,3,4", "--boolean", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["boolean"]["B3"], 4);
    assert!(dir.path().join("young_2_3_4.txt").exists());

    let o = bosonic(dir.path(), &["lattice", "--mu", "1,2,3", "--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["vertices"], 14);
    let graph = json_file(&dir.path().join("young_1_2_3.json"));
    assert!(graph.is_object());

    let o = bosonic(dir.path(), &["lattice"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["vertices"], 1);

    let o = bosonic(dir.path(), &["lattice", "--catalan", "4,3,1"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["vertices"], 14);
}

#[test]
fn verify_suites() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["parity-surjectivity", "dyck-counts", "multiplicities"] {
        let o = bosonic(dir.path(), &["verify", suite]);
        assert_eq!(o.status.code(), Some(0), "{suite}");
        let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(doc["pass"], true);
    }
    let o = bosonic(dir.path(), &["verify", "gradients"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = doc["checks"].as_array().unwrap();
    let find = |name: &str| checks.iter().find(|c| c["name"] == name).unwrap()["pass"].clone();
    assert_eq!(find("M=2 n=2 depth=1 parameter shift vs analytic"), true);
    assert_eq!(find("M=4 n=3 depth=2 central difference vs analytic"), true);
    assert_eq!(o.status.code(), Some(if doc["pass"] == true { 0 } else { 1 }));

    let o = bosonic(dir.path(), &["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}
