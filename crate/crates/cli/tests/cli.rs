use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dqreg_cli::{run, CliError, Document, FitOutput, QuantilesOutput, SimulateOutput};
use dqreg_core::simulate::{generate_dataset, ScenarioConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dqreg"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn scenario_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut sc = ScenarioConfig::preset("basis-het").unwrap();
    sc.n = n;
    let data = generate_dataset(&sc, seed).unwrap();
    let mut body = String::from("y,delta,x\n");
    for (y, d, x) in data.rows() {
        body.push_str(&format!("{y},{},{}\n", u8::from(d), x[1]));
    }
    write(dir, "scenario.csv", &body)
}

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("dqreg").chain(list.iter().copied()).map(String::from).collect()
}

#[test]
fn toy_csv_dry_run_echoes_shape() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "toy.csv", "y,delta,x\n1.2,1,0.5\n0.7,0,1.5\n2.0,1,2.5\n");
    let out = run(args(&["fit", csv.to_str().unwrap(), "--dry-run"])).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["n"], 3);
    assert_eq!(v["result"]["p"], 1);
    assert_eq!(v["config"]["data"], csv.to_str().unwrap());
}

#[test]
fn bad_delta_exits_with_data_code_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "bad.csv", "y,delta,x\n1,1,0\n2,0,1\n3,2,2\n");
    let out = bin().args(["fit", csv.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
}

#[test]
fn exit_codes_are_stable() {
    assert_eq!(bin().arg("nonsense").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["fit", "--copula", "gaussian", "x.csv"]).output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["fit", "/definitely/missing.csv"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["diagnose", "frank", "--theta", "0"]).output().unwrap().status.code(), Some(3));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn seed_environment_variable_overrides_flags() {
    let out = bin().args(["diagnose", "clayton", "--seed", "4"]).env("DQREG_SEED", "99").output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 99);
    let bad = bin().args(["diagnose"]).env("DQREG_SEED", "x").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn diagnose_clayton_keeps_c_given_t() {
    let out = run(args(&["diagnose", "clayton"])).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let r = &v["result"]["reports"][0];
    assert_eq!(r["t_given_c_vanishes"], true);
    assert_eq!(r["c_given_t_vanishes"], false);
}

#[test]
fn scenario_fit_quantiles_and_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = scenario_csv(dir.path(), 500, 1);
    let fit_path = dir.path().join("fit.json");
    let first = run(args(&["fit", csv.to_str().unwrap(), "--seed", "1", "--out", fit_path.to_str().unwrap()])).unwrap();
    assert_eq!(fs::read_to_string(&fit_path).unwrap(), first);
    let doc: Document<FitOutput> = serde_json::from_str(&first).unwrap();
    assert!(doc.result.fit.aic.is_finite());
    assert!(doc.result.fit.continuity_residual.abs() < 1e-6);

    // p = λ̂ gives the regression line
    let lambda = doc.result.fit.params.lambda;
    let q = run(args(&[
        "quantiles",
        fit_path.to_str().unwrap(),
        "--levels",
        &format!("{lambda}"),
        "--x",
        "2",
    ]))
    .unwrap();
    let q: Document<QuantilesOutput> = serde_json::from_str(&q).unwrap();
    let beta = &doc.result.fit.params.beta;
    let line = beta[0] + 2.0 * beta[1];
    assert!((q.result.predictions[0].value - line).abs() < 1e-9);

    // the emitted document, used as a configuration, reproduces the run
    let again = run(args(&["fit", "--config", fit_path.to_str().unwrap()])).unwrap();
    assert_eq!(again, first);
}

#[test]
fn simulate_two_replications_gives_nine_cells() {
    let out = run(args(&["simulate", "basis-het", "--reps", "2", "--n", "300", "--starts", "3"])).unwrap();
    let doc: Document<SimulateOutput> = serde_json::from_str(&out).unwrap();
    assert_eq!(doc.result.report.cells.len(), 9);
    assert!(doc.result.table.contains("rBias"));
    let err = run(args(&["simulate", "no-such-scenario"])).unwrap_err();
    assert!(matches!(err, CliError::Usage(_)));
}
