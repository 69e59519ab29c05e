//! Report-level checks: section shapes, CSV table layout, and the
//! per-policy content each scenario promises.

use std::collections::BTreeMap;

use collapse_core::measure::CollapsePolicy;
use collapse_core::scenario::{self, EmitFormat, RunReport};

const BOTH: [CollapsePolicy; 2] = [CollapsePolicy::Collapse, CollapsePolicy::UnitaryOnly];

fn run(name: &str, overrides: &[(&str, f64)], seed: u64) -> RunReport {
    let overrides: BTreeMap<String, f64> =
        overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let spec = scenario::build(name, &overrides, seed).unwrap();
    scenario::run(&spec, &BOTH).unwrap()
}

fn read_lines(path: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn hardy_report_has_the_probability_table_and_contradiction() {
    let report = run("hardy", &[], 0);
    assert!(report.all_passed);
    let collapse = &report.policies["collapse"];
    let probs = collapse.probabilities.as_ref().unwrap();
    assert_eq!(probs.len(), 4);
    assert!(collapse.retrodiction.as_ref().unwrap().contradiction);
    // The unitary section reports the same statistics without forcing any
    // retrodicted state.
    let unitary = &report.policies["unitary"];
    assert_eq!(unitary.probabilities.as_ref().unwrap(), probs);
    assert!(unitary.retrodiction.is_none());
}

#[test]
fn hardy_probabilities_csv_has_four_rows() {
    let report = run("hardy", &[], 0);
    let dir = tempfile::tempdir().unwrap();
    let written = scenario::emit(&report, EmitFormat::Csv, dir.path()).unwrap();
    let probs = written
        .iter()
        .find(|p| p.file_name().unwrap() == "probabilities.csv")
        .expect("probabilities.csv written");
    let lines = read_lines(probs);
    assert_eq!(lines[0], "outcome,probability");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("c+c-,7.5"));
}

#[test]
fn triple_interference_grid_csv_has_one_row_per_point() {
    let report = run("triple-interference", &[("trials", 200.0)], 5);
    let dir = tempfile::tempdir().unwrap();
    let written = scenario::emit(&report, EmitFormat::Csv, dir.path()).unwrap();
    let noclick = written
        .iter()
        .find(|p| p.file_name().unwrap() == "intensity_collapse_noclick.csv")
        .expect("no-click intensity table written");
    let lines = read_lines(noclick);
    assert_eq!(lines[0], "x,intensity");
    assert_eq!(lines.len(), 1 + 1024);
    // Expectations table always comes along.
    assert!(written
        .iter()
        .any(|p| p.file_name().unwrap() == "expectations.csv"));
}

#[test]
fn json_emission_writes_a_versioned_report() {
    let report = run("mz-histories", &[], 3);
    let dir = tempfile::tempdir().unwrap();
    let written = scenario::emit(&report, EmitFormat::Json, dir.path()).unwrap();
    assert_eq!(written.len(), 1);
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&written[0]).unwrap()).unwrap();
    assert_eq!(value["schema_version"], 1);
    assert_eq!(value["scenario"]["name"], "mz-histories");
    assert_eq!(value["scenario"]["seed"], 3);
    assert!(value["policies"]["unitary"]["intensity"]["coherent"]["values"].is_array());
}

#[test]
fn single_policy_runs_produce_single_sections() {
    let spec = scenario::build("which-way", &BTreeMap::from([("trials".to_string(), 200.0)]), 1)
        .unwrap();
    let report = scenario::run(&spec, &[CollapsePolicy::Collapse]).unwrap();
    assert_eq!(report.policies.len(), 1);
    assert!(report.policies["collapse"].frequencies.is_some());

    let report = scenario::run(&spec, &[CollapsePolicy::UnitaryOnly]).unwrap();
    assert_eq!(report.policies.len(), 1);
    // No selection statistics without collapse; the branch table persists.
    let unitary = &report.policies["unitary"];
    assert!(unitary.frequencies.is_none());
    assert_eq!(unitary.branches.as_ref().unwrap().len(), 2);
}

#[test]
fn every_scenario_passes_its_expectations_with_defaults() {
    // Trial counts reduced where the statistics allow it; tolerances scale
    // with the trial count, so these stay honest checks.
    let cases: [(&str, Vec<(&str, f64)>); 6] = [
        ("hardy", vec![]),
        ("mz-histories", vec![]),
        ("which-way", vec![("trials", 2000.0)]),
        ("triple-interference", vec![("trials", 2000.0)]),
        ("rdm-delay", vec![("trials", 20000.0)]),
        ("csl-ensemble", vec![("n_traj", 1000.0)]),
    ];
    for (name, overrides) in &cases {
        let report = run(name, overrides, 42);
        for e in &report.expectations {
            assert!(
                e.pass,
                "{name}: `{}` expected {} got {} (tol {})",
                e.name, e.expected, e.actual, e.tolerance
            );
        }
    }
}

#[test]
fn mc_sampling_mode_adds_plate_histogram_data() {
    let report = run(
        "triple-interference",
        &[("trials", 100.0), ("mc_samples", 500.0)],
        8,
    );
    let samples = report.policies["collapse"].plate_samples.as_ref().unwrap();
    assert_eq!(samples["noclick"].len(), 500);
    let dir = tempfile::tempdir().unwrap();
    let written = scenario::emit(&report, EmitFormat::Csv, dir.path()).unwrap();
    assert!(written
        .iter()
        .any(|p| p.file_name().unwrap() == "samples_collapse_noclick.csv"));
}
