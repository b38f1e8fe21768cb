//! End-to-end tests for the binary: exit codes, file outputs, determinism,
//! and the printed analyzer tables.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delayed-pow"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const ATTACK_SCENARIO: &str = r#"{
    "params": { "k": 3, "discount": 0.9 },
    "mode": "discrete",
    "horizon": 40,
    "seed": 7,
    "roster": [
        { "id": "attacker", "power": 1.0, "strategy": "double_spend(l=10, eps=1.0)" }
    ]
}"#;

#[test]
fn run_writes_the_three_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", ATTACK_SCENARIO);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["run", "--scenario", &scenario, "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    for name in ["events.log", "summary.csv", "report.txt"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(csv.starts_with(
        "seed,k,d,gamma0,delta,epsilon,attacker_profit,honest_mean_utility,slashed_total\n"
    ));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", ATTACK_SCENARIO);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = bin()
            .args(["run", "--scenario", &scenario, "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    for name in ["events.log", "summary.csv", "report.txt"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn seed_override_changes_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "s.json",
        r#"{
            "params": { "k": 2, "discount": 0.9 },
            "horizon": 100,
            "roster": [
                { "id": "a", "power": 0.5, "strategy": "honest" },
                { "id": "b", "power": 0.5, "strategy": "honest" }
            ]
        }"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "1"), (&out_b, "2")] {
        let output = bin()
            .args(["run", "--scenario", &scenario, "--seed", seed, "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    let a = std::fs::read(out_a.join("events.log")).unwrap();
    let b = std::fs::read(out_b.join("events.log")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn missing_roster_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "s.json",
        r#"{ "params": { "k": 3, "discount": 0.9 }, "horizon": 40 }"#,
    );
    let output = bin()
        .args(["run", "--scenario", &scenario])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("roster"), "stderr: {}", stderr(&output));
}

#[test]
fn out_of_range_discount_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "s.json",
        r#"{ "params": { "k": 3, "discount": 1.0 }, "horizon": 40,
             "roster": [ { "id": "a", "power": 1.0, "strategy": "honest" } ] }"#,
    );
    let output = bin()
        .args(["run", "--scenario", &scenario])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(
        stderr(&output).contains("discount out of range"),
        "stderr: {}",
        stderr(&output)
    );
}

#[test]
fn sweep_writes_rows_for_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "s.json",
        r#"{
            "params": { "k": 3, "discount": 0.9 },
            "horizon": 40,
            "roster": [
                { "id": "attacker", "power": 1.0, "strategy": "double_spend(l=10, eps=1.0)" }
            ],
            "sweep": { "epsilon": [0.8, 1.0, 1.2] },
            "seeds": 4
        }"#,
    );
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["sweep", "--scenario", &scenario, "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,k,d,gamma0,delta,epsilon,attack_round,attacker_profit,honest_mean_utility,slashed_total,predicted_breakeven_eps"
    );
    assert_eq!(lines.count(), 12);
}

#[test]
fn sweep_rejects_unknown_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "s.json",
        r#"{
            "params": { "k": 3, "discount": 0.9 },
            "horizon": 40,
            "roster": [ { "id": "a", "power": 1.0, "strategy": "honest" } ],
            "sweep": { "mystery": [1.0] }
        }"#,
    );
    let output = bin()
        .args(["sweep", "--scenario", &scenario])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("mystery"));
}

#[test]
fn sweep_without_a_sweep_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", ATTACK_SCENARIO);
    let output = bin()
        .args(["sweep", "--scenario", &scenario])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("sweep"));
}

#[test]
fn analyze_prints_the_value_at_risk() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", ATTACK_SCENARIO);
    let output = bin()
        .args(["analyze", "--scenario", &scenario])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("value_at_risk"));
    assert!(text.contains("0.94491857"), "stdout: {text}");
    assert!(text.contains("profitable"));
}

#[test]
fn analyze_without_attacker_needs_an_attack_round() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "s.json",
        r#"{ "params": { "k": 3, "discount": 0.9 }, "horizon": 40,
             "roster": [ { "id": "a", "power": 1.0, "strategy": "honest" } ] }"#,
    );
    let output = bin()
        .args(["analyze", "--scenario", &scenario])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = bin()
        .args(["analyze", "--scenario", &scenario, "--attack-round", "10"])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(stdout(&output).contains("0.94491857"));
}

#[test]
fn game_prints_the_example_payoff_table() {
    let output = bin()
        .args(["game", "-n", "3", "--alpha", "1", "--beta", "2"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("(000) -> [1,1,1]"));
    assert!(text.contains("(110) -> [2,2,0]"));
    assert!(text.contains("(100) -> [0,0,0]"));
    assert!(text.contains("all-zero profile is a Nash equilibrium: true"));
    assert!(text.contains("disagree"));
}

#[test]
fn game_reports_infeasible_discounts() {
    let output = bin()
        .args([
            "game", "-n", "3", "--alpha", "1", "--beta", "3", "--k", "2", "--t", "1",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(stdout(&output).contains("Infeasible"));
}

#[test]
fn game_solves_the_quadratic_threshold() {
    let output = bin()
        .args([
            "game", "-n", "4", "--alpha", "1", "--beta", "3", "--k", "4", "--t", "2",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    // (sqrt(3) - 1) / 2 to bisection tolerance.
    assert!(stdout(&output).contains("0.36602540"), "stdout: {}", stdout(&output));
}
