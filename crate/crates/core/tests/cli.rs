// SPDX-License-Identifier: Apache-2.0

use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flp-adversary"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn attack_rejects_inconsistent_protocol() {
    let o = run(&["attack", "--protocol", "constant", "--n", "3", "--steps", "10"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("agreement"));
}

#[test]
fn attack_requires_two_processes() {
    let o = run(&["attack", "--protocol", "uniform-vote", "--n", "1", "--steps", "10"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn attack_json_summary() {
    let o = run(&[
        "attack", "--protocol", "uniform-vote", "--n", "3", "--steps", "30", "--variant", "fork",
        "--certify-prefix", "5", "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["steps"], 30);
    assert_eq!(v["rounds_completed"], 10);
    assert_eq!(v["certified_prefix"], 5);
    assert_eq!(v["variant"], "fork");
}

#[test]
fn witness_on_uniform_zero_decides_zero() {
    let o = run(&[
        "witness", "--protocol", "uniform-vote", "--n", "3", "--init", "000", "--exclude", "1",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("value: 0"));
}

#[test]
fn witness_reports_certified_blocking() {
    let o = run(&[
        "witness", "--protocol", "flood-all", "--n", "3", "--init", "010", "--exclude", "2",
    ]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("blocked"));
}

#[test]
fn witness_rejects_bad_arguments() {
    let long = run(&[
        "witness", "--protocol", "uniform-vote", "--n", "3", "--init", "0101", "--exclude", "1",
    ]);
    assert_eq!(code(&long), 1);
    let range = run(&[
        "witness", "--protocol", "uniform-vote", "--n", "3", "--init", "010", "--exclude", "4",
    ]);
    assert_eq!(code(&range), 1);
}

#[test]
fn blocking_on_flood_all() {
    let o = run(&["blocking", "--protocol", "flood-all", "--n", "3", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["blocking"], true);
}

#[test]
fn agreement_on_constant_finds_violation() {
    let o = run(&["agreement", "--protocol", "constant", "--n", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("agreement violated"));
}

#[test]
fn init_search_on_uniform_vote() {
    let o = run(&["init-search", "--protocol", "uniform-vote", "--n", "3", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let k = v["k"].as_u64().unwrap();
    assert!((1..=3).contains(&k));
}

#[test]
fn verify_round_trip_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let p = path.to_str().unwrap();
    let o = run(&[
        "attack", "--protocol", "uniform-vote", "--n", "3", "--steps", "60", "--out", p,
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&run(&["verify", "--trace", p])), 0);

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut rec: Value = serde_json::from_str(&lines[5]).unwrap();
    rec["turn_process"] = Value::from(rec["turn_process"].as_u64().unwrap() % 3 + 1);
    lines[5] = rec.to_string();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = run(&["verify", "--trace", bad.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 3);
    let cert: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cert["fairness_ok"], false);
    assert_eq!(cert["violations"].as_array().unwrap().len(), 1);

    let junk = dir.path().join("junk.jsonl");
    std::fs::write(&junk, "not a trace\n").unwrap();
    assert_eq!(code(&run(&["verify", "--trace", junk.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["verify", "--trace", "/nonexistent/trace"])), 1);
}

#[test]
fn commute_is_seeded() {
    let args = [
        "commute", "--protocol", "uniform-vote", "--n", "3", "--trials", "25", "--seed", "9",
        "--json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let o = run(&["commute", "--protocol", "flood-all", "--n", "2", "--depth", "2", "--exhaustive"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("counterexamples: 0"));
}

#[test]
fn unknown_subcommand_is_usage() {
    assert_eq!(code(&run(&["explode"])), 1);
    assert_eq!(code(&run(&[])), 1);
}
