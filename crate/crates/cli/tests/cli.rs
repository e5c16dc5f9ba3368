use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchsync")).args(args).output().expect("binary runs")
}

fn json_stdout(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json")
}

#[test]
fn count_paw_p2() {
    let v = json_stdout(&["count", "--graph", "paw", "--p", "2"]);
    assert_eq!(v["N"], 42);
    assert!((v["bound_I"].as_f64().unwrap() - 3.608).abs() < 1e-3);
    assert!((v["bound_T"].as_f64().unwrap() - 24.381).abs() < 1e-3);
    assert_eq!(v["config"]["graph_spec"], "paw");
}

#[test]
fn count_with_enumeration_and_traces() {
    let v = json_stdout(&["count", "--p", "3", "--enumerate", "--per-trace", "--mu", "0.25,0.25,0.25,0.25"]);
    assert_eq!(v["N"], 216);
    assert_eq!(v["N_enumerated"], 216);
    let traces = v["per_trace"].as_array().unwrap();
    assert_eq!(traces.len(), 16);
    let sum: u64 = traces.iter().map(|t| t["N_z"].as_u64().unwrap()).sum();
    assert_eq!(sum, 216);
    assert!((v["general_bound_T"].as_f64().unwrap() - v["bound_T"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn sample_output_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    let base = ["sample", "--graph", "paw", "--policy", "fcfm", "--p", "1", "--algo", "algo3", "--reps", "3", "--seed", "1"];
    for (path, jobs) in [(&a, "1"), (&b, "1"), (&c, "4")] {
        let mut args: Vec<&str> = base.to_vec();
        args.extend(["--output", path.to_str().unwrap(), "--jobs", jobs]);
        assert!(run(&args).status.success());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes, std::fs::read(&c).unwrap());
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["config"]["seed"], 1);
    assert_eq!(v["results"].as_array().unwrap().len(), 3);
    let reps: Vec<u64> = v["results"].as_array().unwrap().iter().map(|r| r["replication"].as_u64().unwrap()).collect();
    assert_eq!(reps, [0, 1, 2]);
}

#[test]
fn jobs_do_not_change_larger_runs() {
    let base = ["loss", "--graph", "complete:3", "--p", "2", "--reps", "400", "--seed", "5"];
    let one = run(&[&base[..], &["--jobs", "1"]].concat());
    let many = run(&[&base[..], &["--jobs", "3"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn deterministic_patience_rejected_by_domination() {
    let out = run(&["sample", "--algo", "algo2", "--gamma", "0", "--patience", "deterministic:3"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("patience law violates P(P<=1)>0"));
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn horizon_cap_exit_code() {
    let out = run(&["sample", "--p", "3", "--algo", "cftp", "--initial-horizon", "1", "--horizon-cap", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "horizon_exceeded");
}

#[test]
fn invalid_configs_exit_2() {
    for args in [
        vec!["sample", "--p", "2", "--mu", "0.5,0.6,0.1,0.1"],
        vec!["sample", "--graph", "nowhere.json", "--p", "2"],
        vec!["sample", "--p", "2", "--policy", "lifo"],
        vec!["sample", "--p", "2", "--patience", "deterministic:3"],
        vec!["sample"],
        vec!["sample", "--patience", "discrete:0.5@0.4,2.5@0.6", "--algo", "algo3"],
        vec!["loss", "--patience", "discrete:0.5@0.4,2.5@0.6", "--algo", "algo2"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn gen_graph_file_feeds_other_commands() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let p = path.to_str().unwrap();
    assert!(run(&["gen-graph", "--n", "5", "--q", "0.6", "--seed", "2024", "--output", p]).status.success());
    let direct = json_stdout(&["count", "--graph", "er:5:0.6:2024", "--p", "2"]);
    let from_file = json_stdout(&["count", "--graph", p, "--p", "2"]);
    assert_eq!(direct["N"], from_file["N"]);
    assert_eq!(direct["config"]["graph"], from_file["config"]["graph"]);
}

#[test]
fn loss_csv_rows_and_totals() {
    let out = run(&["loss", "--graph", "complete:2", "--p", "1", "--reps", "2000", "--seed", "3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "class,policy,rate,std_error");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let rate = |i: usize| rows[i][2].parse::<f64>().unwrap();
    assert_eq!(rows[2][0], "total");
    assert_eq!(rate(2), rate(0) + rate(1));
}

#[test]
fn compare_policies_and_samplers() {
    let v = json_stdout(&["compare", "--p", "2", "--policies", "fcfm;ml;fcfm", "--reps", "300"]);
    let diffs = v["summary"]["paired_differences"].as_array().unwrap();
    assert_eq!(diffs.len(), 3);
    // fcfm against itself
    assert_eq!(diffs[1]["mean"], 0.0);
    let v = json_stdout(&["compare", "--p", "2", "--samplers", "algo3,cftp", "--reps", "50"]);
    let rows = v["results"].as_array().unwrap();
    assert!(rows[0]["mean_operations"].as_f64().unwrap() < rows[1]["mean_operations"].as_f64().unwrap());
}

#[test]
fn validate_flags_negative_control() {
    let base = ["validate", "--graph", "complete:2", "--p", "1", "--reps", "3000", "--forward-steps", "200000", "--seed", "4"];
    let ok = json_stdout(&base);
    assert_eq!(ok["summary"]["pass"], true);
    let bad = json_stdout(&[&base[..], &["--negative-control"]].concat());
    assert_eq!(bad["summary"]["pass"], false);
}

#[test]
fn general_patience_sampling() {
    let v = json_stdout(&[
        "sample", "--graph", "complete:2", "--patience", "discrete:0.5@0.4,2.5@0.6", "--algo", "algo2", "--reps", "5",
    ]);
    assert_eq!(v["results"].as_array().unwrap().len(), 5);
}

#[test]
fn model_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"mu": [0.5, 0.5], "patience": {"deterministic": 1}, "gamma": 0.2}"#).unwrap();
    let v = json_stdout(&["sample", "--graph", "complete:2", "--model", path.to_str().unwrap(), "--algo", "algo2", "--reps", "2"]);
    assert_eq!(v["config"]["model"]["gamma"], 0.2);
}
