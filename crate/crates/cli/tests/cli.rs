use std::process::{Command, Output};

fn ghzt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghzt"))
        .args(args)
        .env_remove("GHZT_SEED")
        .output()
        .expect("failed to launch ghzt")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_prints_unit_fidelity() {
    let out = ghzt(&["run", "-m", "3", "-n", "1", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().next(), Some("fidelity: 1.000000000"));
}

#[test]
fn run_with_withheld_bit_fails_and_records_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let out = ghzt(&[
        "run", "-m", "3", "-n", "1", "--withhold", "c2", "--seed", "7", "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let events = json["events"].as_array().unwrap();
    assert!(events
        .iter()
        .any(|e| e["type"] == "missing_classical_bit" && e["bit"] == "c2"));

    let out = ghzt(&["run", "-m", "3", "-n", "1", "--withhold", "c2", "--seed", "7", "--no-assert"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn distributed_run_is_exact() {
    let out = ghzt(&["run", "-m", "4", "-n", "2", "--mode", "distributed", "--allocation", "0:0,1:1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("fidelity: 1.000000000"));
}

#[test]
fn run_json_is_seed_deterministic() {
    let a = ghzt(&["run", "-m", "4", "-n", "2", "--seed", "11", "--format", "json"]);
    let b = ghzt(&["run", "-m", "4", "-n", "2", "--seed", "11", "--format", "json"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_falls_back_to_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_ghzt"))
        .args(["run", "-m", "3", "--format", "json"])
        .env("GHZT_SEED", "5")
        .output()
        .unwrap();
    let with_flag = ghzt(&["run", "-m", "3", "--format", "json", "--seed", "5"]);
    assert_eq!(with_env.stdout, with_flag.stdout);
}

#[test]
fn verify_single_config() {
    let out = ghzt(&["verify", "-m", "3", "-n", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("8/8 branches OK"));
}

#[test]
fn verify_json_lists_reports() {
    let out = ghzt(&["verify", "-m", "3", "-n", "2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json[0]["branches_checked"], 64);
    assert_eq!(json[0]["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn table_post_stage_labels() {
    let out = ghzt(&["table", "-m", "3", "-n", "1", "--stage", "post", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let labels: Vec<&str> = json["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["correction"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["I", "Z", "X", "XZ", "Z", "I", "ZX", "ZXZ"]);
}

#[test]
fn table_row_counts() {
    for (m, n, rows) in [("4", "1", 4), ("3", "2", 16)] {
        let out = ghzt(&["table", "-m", m, "-n", n, "--stage", "pre", "--format", "md"]);
        assert_eq!(out.status.code(), Some(0));
        // header + separator + rows
        assert_eq!(stdout(&out).lines().count(), rows + 2, "m={m} n={n}");
    }
}

#[test]
fn audit_report_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.json");
    let out = ghzt(&[
        "audit", "--mode", "minimal", "-m", "4", "-n", "2", "--trials", "50", "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(json["min"].is_number());
    assert!(json["mean"].is_number());
    assert_eq!(json["fidelities"].as_array().unwrap().len(), 50);
}

#[test]
fn hinton_svg_from_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("transcript.json");
    let svg = dir.path().join("out.svg");
    let out = ghzt(&["run", "-m", "3", "-n", "1", "--seed", "2", "-o", transcript.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = ghzt(&[
        "hinton", "--from", transcript.to_str().unwrap(), "--format", "svg", "-o",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<?xml"));
    assert!(text.contains("ρ_in") && text.contains("ρ_out"));
    assert_eq!(text.matches("class=\"panel re\"").count(), 2);
    assert_eq!(text.matches("class=\"panel im\"").count(), 2);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["run", "-m", "2"][..],
        &["run", "--mode", "sideways"],
        &["run", "--withhold", "c99"],
        &["run", "-n", "2", "--allocation", "0:5"],
        &["table", "--format", "svg"],
        &["table", "--stage", "later"],
        &["hinton", "--from", "/nonexistent/transcript.json"],
        &["frobnicate"],
        &["run", "--unknown-flag"],
    ] {
        assert_eq!(ghzt(args).status.code(), Some(2), "{args:?}");
    }
}
