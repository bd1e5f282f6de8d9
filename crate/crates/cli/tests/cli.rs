use std::fs;
use std::process::{Command, Output};

use bec_design::optimizer::DesignResult;
use bec_design::sdp::SolveStatus;
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bec-design"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn optimize_max_threshold_writes_schema_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = bin(&[
        "optimize", "--mode", "max-threshold", "--rho", "x^5", "--dv-max", "7", "--format", "json", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    for key in ["mode", "lambda", "rho", "t_star", "epsilon", "rate", "delta", "certificate", "de", "status", "solver"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["solver"].get("iterations").is_some() && v["solver"].get("gap").is_some());
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["lambda"]["side"], "lambda");

    let parsed: DesignResult = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.solver_status, SolveStatus::Optimal);
    assert_eq!(serde_json::to_value(&parsed).unwrap(), v);
    assert!(stdout(&o).contains("t*"));
}

#[test]
fn optimize_max_rate_small_regime() {
    let o = bin(&["optimize", "--mode", "max-rate", "--rho", "x^4", "--dv-max", "5", "--epsilon", "0.44"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Optimal"));
}

#[test]
fn missing_epsilon_is_usage_error() {
    let o = bin(&["optimize", "--mode", "max-rate", "--rho", "x^4", "--dv-max", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_inputs_are_usage_errors() {
    assert_eq!(bin(&["optimize", "--mode", "max-threshold", "--rho", "0.5*x + 0.6*x^2", "--dv-max", "4"]).status.code(), Some(2));
    assert_eq!(bin(&["optimize", "--mode", "max-threshold", "--rho", "x^5"]).status.code(), Some(2));
    assert_eq!(bin(&["optimize", "--mode", "nope"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    let o = bin(&["threshold", "--lambda", "x^2 - x", "--rho", "x^5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("column"));
}

#[test]
fn infeasible_design_exits_one() {
    let o = bin(&["optimize", "--mode", "max-rate", "--rho", "x^5", "--dv-max", "3", "--epsilon", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn poly_degree_convention_shifts_dv() {
    let o = bin(&[
        "optimize", "--mode", "max-rate", "--rho", "x^5", "--dv-max", "6", "--epsilon", "0.49", "--convention",
        "poly-degree", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rate = v["rate"].as_f64().unwrap();
    assert!((rate - 0.4922).abs() < 5e-4, "{rate}");
}

#[test]
fn verify_and_threshold_commands() {
    let o = bin(&["verify", "--lambda", "x^2", "--rho", "x^5", "--epsilon", "0.42", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["de"]["converged"].as_bool().unwrap());

    let o = bin(&["verify", "--lambda", "x^2", "--rho", "x^5", "--epsilon", "0.5"]);
    assert_eq!(o.status.code(), Some(1));

    let o = bin(&["threshold", "--lambda", "x^2", "--rho", "x^5", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["threshold"].as_f64().unwrap() - 0.4294).abs() < 1e-3);
}

#[test]
fn verify_saved_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = bin(&[
        "optimize", "--mode", "max-rate", "--rho", "x^5", "--dv-max", "7", "--epsilon", "0.49", "--format", "json",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = bin(&["verify", "--input", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn emit_curves_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves");
    let o = bin(&[
        "optimize", "--mode", "max-rate", "--rho", "x^5", "--dv-max", "7", "--epsilon", "0.49", "--emit-curves",
        curves.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let q = fs::read_to_string(curves.join("constraint.csv")).unwrap();
    assert!(q.starts_with("x,q\n"));
    assert_eq!(q.lines().count(), 1002);
    let min = q
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-6);
    let de = fs::read_to_string(curves.join("de_trajectory.csv")).unwrap();
    assert!(de.starts_with("iteration,erasure\n"));
}

#[test]
fn table_outputs() {
    let o = bin(&["table", "--format", "csv", "--only", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "key,label,epsilon,d_c,d_v,delta,computed\n");

    let o = bin(&["table", "--format", "json", "--convention", "poly-degree"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let cols = v.as_array().unwrap();
    assert_eq!(cols.len(), 5);
    let live = &cols[0];
    assert_eq!(live["key"], "live");
    assert!(live["delta"].as_f64().unwrap() <= 0.04);
    assert_eq!((live["d_c"].as_u64(), live["d_v"].as_u64()), (Some(5), Some(6)));
    let mct = cols.iter().find(|c| c["key"] == "mct").unwrap();
    assert_eq!(mct["delta"].as_f64(), Some(0.0493));
}

#[test]
fn examples_flag_discrepancies() {
    let o = bin(&["examples", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    assert!((reports[0]["a"].as_f64().unwrap() + 2.0).abs() < 1e-6);
    let x4 = reports.iter().find(|r| r["key"] == "rho-x4-dv5").unwrap();
    assert!((x4["recomputed_rate"].as_f64().unwrap() - 0.4482).abs() < 1e-3);
    assert!(!x4["flags"].as_array().unwrap().is_empty());
    assert_eq!(bin(&["examples", "--only", "bogus"]).status.code(), Some(2));
}
