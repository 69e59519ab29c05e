//! End-to-end checks of the collapse-sim binary.

use std::path::Path;
use std::process::{Command, Output};

fn collapse_sim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collapse-sim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn list_names_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse_sim(&["list"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "hardy",
        "mz-histories",
        "which-way",
        "triple-interference",
        "rdm-delay",
        "csl-ensemble",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn describe_shows_parameters_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse_sim(&["describe", "rdm-delay"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("--param rate="));
    assert!(text.contains("--param delay="));
}

#[test]
fn run_hardy_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse_sim(
        &["run", "hardy", "--seed", "7", "--out", "out", "--format", "json"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("[PASS] hardy: p(c+c-)"));
    assert!(dir.path().join("out/report.json").is_file());
}

#[test]
fn run_emits_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse_sim(
        &[
            "run",
            "mz-histories",
            "--policy",
            "unitary",
            "--out",
            "tables",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(dir.path().join("tables/intensity_unitary_coherent.csv").is_file());
    assert!(dir.path().join("tables/expectations.csv").is_file());
}

#[test]
fn unknown_parameter_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse_sim(&["run", "hardy", "--param", "bogus=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown parameter"));
}

#[test]
fn unknown_scenario_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = collapse_sim(&["run", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_the_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"name": "rdm-delay", "parameters": {"trials": 5000, "delay": 0.25}, "seed": 12}"#,
    )
    .unwrap();

    let out = collapse_sim(
        &["run", "--config", "run.json", "--out", "a"], // config alone
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a/report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["scenario"]["seed"], 12);
    assert_eq!(report["scenario"]["parameters"]["delay"], 0.25);

    let out = collapse_sim(
        &[
            "run",
            "--config",
            "run.json",
            "--param",
            "delay=0.5",
            "--seed",
            "99",
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("b/report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["scenario"]["seed"], 99);
    assert_eq!(report["scenario"]["parameters"]["delay"], 0.5);
    assert_eq!(report["scenario"]["parameters"]["trials"], 5000.0);
}

#[test]
fn same_seed_gives_byte_identical_reports_via_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["x", "y"] {
        let out = collapse_sim(
            &[
                "run",
                "csl-ensemble",
                "--param",
                "n_traj=300",
                "--seed",
                "5",
                "--out",
                sub,
            ],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let x = std::fs::read(dir.path().join("x/report.json")).unwrap();
    let y = std::fs::read(dir.path().join("y/report.json")).unwrap();
    assert_eq!(x, y);
}
