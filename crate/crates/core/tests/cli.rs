mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use covshift::histogram::ActivationHistogram;
use covshift::reshape::{MilpInstance, PlanStatus, ReshapePlan, ReshapeProblem};
use covshift::{BinningSpec, Dataset, Network};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covshift")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_hist(path: &Path, spec: BinningSpec, total: u64, counts: Vec<Vec<u64>>) {
    let neurons = (0..counts.len()).collect();
    ActivationHistogram::from_counts(spec, 1, neurons, total, counts).unwrap().save(path).unwrap();
}

#[test]
fn bounds_reproduces_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bounds.json");
    let model = fixture("example1.json");
    let out = run(&["bounds", "--model", s(&model), "--layer", "2", "--delta", "3", "--out", s(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["spec"]["c"], 0.0);
    assert_eq!(v["spec"]["n"], 5);
    assert_eq!(v["intervals"][0]["hi"], 14.0);
    assert_eq!(v["intervals"][1]["hi"], 5.0);
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, v);
}

#[test]
fn bounds_errors_have_distinct_exit_codes() {
    let model = fixture("example1.json");
    let out = run(&["bounds", "--model", s(&model), "--layer", "3", "--delta", "3"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1..=2"));
    let out = run(&["bounds", "--model", "/nonexistent/model.json", "--delta", "3"]);
    assert_eq!(code(&out), 1);
    let out = run(&["bounds", "--model", s(&model)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn histogram_with_shared_spec_and_similarity_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = fixture("regression12/model.json");
    let test = fixture("regression12/test.csv");
    let op = fixture("regression12/op.csv");
    let h_test = d.join("h_test.json");
    let h_op = d.join("h_op.json");
    assert_eq!(code(&run(&["histogram", "--model", s(&model), "--data", s(&test), "--delta", "1", "--out", s(&h_test)])), 0);
    // The operational side reuses the test histogram's binning.
    assert_eq!(code(&run(&["histogram", "--model", s(&model), "--data", s(&op), "--spec", s(&h_test), "--out", s(&h_op)])), 0);
    let a = ActivationHistogram::load(&h_test).unwrap();
    let b = ActivationHistogram::load(&h_op).unwrap();
    assert_eq!(a.spec(), b.spec());
    assert_eq!(a.total(), 12);
    assert_eq!(b.total(), 28);

    assert_eq!(code(&run(&["similarity", "--op", s(&h_test), "--test", s(&h_test), "--eps", "0.01"])), 0);
    assert_eq!(code(&run(&["similarity", "--op", s(&h_test), "--test", s(&h_test), "--kappa", "0"])), 0);
    let report = d.join("sim.json");
    let out = run(&["similarity", "--op", s(&h_op), "--test", s(&h_test), "--eps", "0.1", "--out", s(&report)]);
    assert_eq!(code(&out), 3);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["satisfied"], false);
    // Both flags, or neither, are rejected by the parser.
    assert_eq!(code(&run(&["similarity", "--op", s(&h_op), "--test", s(&h_test), "--eps", "0.1", "--kappa", "1"])), 2);
    assert_eq!(code(&run(&["similarity", "--op", s(&h_op), "--test", s(&h_test)])), 2);
    assert_eq!(code(&run(&["histogram", "--model", s(&model), "--data", s(&op), "--spec", s(&h_test), "--delta", "1", "--out", s(&h_op)])), 2);
}

#[test]
fn similarity_names_the_worst_cell_and_rejects_mismatched_specs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = BinningSpec::new(0.0, 1.0, 1).unwrap();
    write_hist(&d.join("op.json"), spec, 10, vec![vec![5, 5], vec![6, 4]]);
    write_hist(&d.join("test.json"), spec, 10, vec![vec![5, 5], vec![5, 5]]);
    let out = run(&["similarity", "--op", s(&d.join("op.json")), "--test", s(&d.join("test.json")), "--eps", "0.05"]);
    assert_eq!(code(&out), 3);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("neuron 1, bin 0"), "{text}");

    write_hist(&d.join("other.json"), BinningSpec::new(0.0, 2.0, 1).unwrap(), 10, vec![vec![5, 5], vec![5, 5]]);
    let out = run(&["similarity", "--op", s(&d.join("op.json")), "--test", s(&d.join("other.json")), "--eps", "0.05"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reshape_regression_fixture_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = fixture("regression12/model.json");
    let test = fixture("regression12/test.csv");
    let op = fixture("regression12/op.csv");
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(fixture("regression12/expected.json")).unwrap()).unwrap();
    let h_op = d.join("h_op.json");
    assert_eq!(code(&run(&["histogram", "--model", s(&model), "--data", s(&op), "--delta", "1", "--out", s(&h_op)])), 0);
    let plan_path = d.join("plan.json");
    let lp = d.join("model.lp");
    let eps = expected["eps"].to_string();
    let out = run(&[
        "reshape", "--model", s(&model), "--test", s(&test), "--op-hist", s(&h_op), "--eps", &eps,
        "--plan", s(&plan_path), "--export-lp", s(&lp),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let plan = ReshapePlan::load(&plan_path).unwrap();
    assert_eq!(plan.status, PlanStatus::Optimal);
    assert_eq!(plan.removed_count, expected["removed_count"].as_u64().map(|v| v as usize));
    assert!(plan.verified);
    assert!(std::fs::read_to_string(&lp).unwrap().contains("Generals"));
    let reshaped = Dataset::load_csv(d.join("reshaped.csv")).unwrap();
    assert_eq!(reshaped.len(), 12 - plan.removed_count.unwrap());

    // The stored value is itself an exhaustive-search result.
    let net = Network::load(&model).unwrap();
    let hist = ActivationHistogram::load(&h_op).unwrap();
    let d_test = Dataset::load_csv(&test).unwrap();
    let sigs = covshift::bin_signatures(&net, &d_test, 1, hist.spec(), None).unwrap();
    let problem = ReshapeProblem {
        spec: *hist.spec(),
        layer: 1,
        neurons: vec![0, 1],
        eps: expected["eps"].as_f64().unwrap(),
        op_total: hist.total(),
        op_counts: hist.counts().to_vec(),
        test_signatures: sigs,
        candidates: (0..12).collect(),
        min_survivors: 1,
    };
    MilpInstance::from_problem(&problem).unwrap();
    assert_eq!(common::brute_force(&problem), plan.removed_count);

    // Greedy refuses a two-neuron instance.
    let out = run(&[
        "reshape", "--model", s(&model), "--test", s(&test), "--op-hist", s(&h_op), "--method", "greedy",
        "--plan", s(&plan_path),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reshape_against_itself_removes_nothing_and_reports_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = fixture("regression12/model.json");
    let test = fixture("regression12/test.csv");
    let plan_path = d.join("plan.json");
    let out = run(&[
        "reshape", "--model", s(&model), "--test", s(&test), "--op-data", s(&test), "--delta", "1", "--eps", "0",
        "--plan", s(&plan_path), "--quiet",
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert_eq!(ReshapePlan::load(&plan_path).unwrap().removed_count, Some(0));

    let op = fixture("regression12/op.csv");
    let out = run(&[
        "reshape", "--model", s(&model), "--test", s(&test), "--op-data", s(&op), "--eps", "0.001",
        "--candidates", "random:4:1", "--plan", s(&plan_path),
    ]);
    assert_eq!(code(&out), 3);
    let plan = ReshapePlan::load(&plan_path).unwrap();
    assert_eq!(plan.status, PlanStatus::Infeasible);
    assert_eq!(plan.candidate_count, 4);
}

const SMALL_EXPERIMENT: &str = r#"{
  "clusters": { "dim": 2, "classes": 3, "spread": 0.4, "radius": 1.5, "center_seed": 3, "range": [-3.0, 3.0] },
  "model": { "train": { "hidden": [6, 4], "activation": "relu", "samples": 300,
                        "train": { "epochs": 5, "step": 0.05, "seed": 1 } } },
  "test": { "synthetic": { "class_weights": [1.0, 1.0, 1.0], "size": 120, "seed": 5 } },
  "operational": { "synthetic": { "class_weights": [1.0, 1.0, 1.0], "size": 120, "seed": 5 } },
  "eps": 0.01
}"#;

#[test]
fn experiment_bundle_is_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("config.json");
    std::fs::write(&config, SMALL_EXPERIMENT).unwrap();
    let (a, b) = (d.join("a"), d.join("b"));
    assert_eq!(code(&run(&["experiment", "--config", s(&config), "--out", s(&a)])), 0);
    assert_eq!(code(&run(&["--threads", "1", "experiment", "--config", s(&config), "--out", s(&b)])), 0);
    for name in covshift::evaluate::BUNDLE_FILES {
        assert!(a.join(name).exists(), "{name}");
        if !name.starts_with("summary") {
            assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
        }
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["removed"], 0);
    assert_eq!(summary["x"], summary["y"]);
    assert_eq!(
        std::fs::read(a.join("test.csv")).unwrap(),
        std::fs::read(a.join("reshaped.csv")).unwrap()
    );
    // Every output is readable by its loader.
    Network::load(a.join("model.json")).unwrap();
    ActivationHistogram::load(a.join("hist_reshaped.json")).unwrap();
    ReshapePlan::load(a.join("plan.json")).unwrap();
    Dataset::load_csv(a.join("operational.csv")).unwrap();
}

#[test]
fn experiment_with_unreachable_eps_records_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("config.json");
    let text = SMALL_EXPERIMENT
        .replace(r#""class_weights": [1.0, 1.0, 1.0], "size": 120, "seed": 5 } },
  "eps""#, r#""class_weights": [5.0, 1.0, 1.0], "size": 120, "seed": 9 } },
  "candidates": { "random": { "k": 3, "seed": 0 } },
  "eps""#)
        .replace(r#""eps": 0.01"#, r#""eps": 0.0"#);
    std::fs::write(&config, text).unwrap();
    let out_dir = d.join("out");
    assert_eq!(code(&run(&["experiment", "--config", s(&config), "--out", s(&out_dir)])), 0);
    let plan = ReshapePlan::load(out_dir.join("plan.json")).unwrap();
    assert_eq!(plan.status, PlanStatus::Infeasible);
    assert_eq!(
        std::fs::read(out_dir.join("spi_test.json")).unwrap(),
        std::fs::read(out_dir.join("spi_reshaped.json")).unwrap()
    );
}
