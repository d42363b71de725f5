//! End-to-end tests of the binary: exit codes, stream discipline, and the
//! replay gate, exercised through real process spawns.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use fleetline::trace::{read_trace, TraceEvent, TraceKind};

fn fleetline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fleetline"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

#[test]
fn validate_accepts_shipped_model() {
    let model = common::scenarios_dir().join("irrigation-model.json");
    let out = fleetline(&["validate", path_str(&model)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout_of(&out).trim(),
        "ok: model `irrigation-fleet` with 8 features"
    );
}

#[test]
fn validate_rejects_broken_model_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(
        &path,
        r#"{"name":"x","root":{"name":"R"},"constraints":[{"kind":"requires","from":"R","to":"Nope"}]}"#,
    )
    .unwrap();
    let out = fleetline(&["validate", path_str(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).starts_with("invalid:"), "{}", stdout_of(&out));
}

#[test]
fn validate_missing_file_is_runtime_error() {
    let out = fleetline(&["validate", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("cannot read"));
}

#[test]
fn missing_arguments_are_usage_errors() {
    assert_eq!(fleetline(&["validate"]).status.code(), Some(2));
    assert_eq!(fleetline(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(fleetline(&[]).status.code(), Some(2));
}

#[test]
fn enumerate_lists_all_and_respects_limit() {
    let model = common::scenarios_dir().join("irrigation-model.json");
    let full = fleetline(&["enumerate", path_str(&model)]);
    assert_eq!(full.status.code(), Some(0));
    let full_text = stdout_of(&full);
    let lines: Vec<&str> = full_text.lines().collect();
    assert_eq!(*lines.last().unwrap(), "total: 22");
    assert_eq!(lines.len(), 23);
    assert!(lines[..22].iter().all(|l| l.contains("Fleet")));

    let limited = fleetline(&["enumerate", path_str(&model), "--limit", "3"]);
    assert_eq!(limited.status.code(), Some(0));
    let limited_text = stdout_of(&limited);
    let limited_lines: Vec<&str> = limited_text.lines().collect();
    assert_eq!(limited_lines.len(), 4);
    assert_eq!(limited_lines[..3], lines[..3]);
    assert_eq!(limited_lines[3], "total: 22 (truncated)");
}

#[test]
fn enumerate_root_only_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.json");
    std::fs::write(&path, r#"{"name":"tiny","root":{"name":"R"}}"#).unwrap();
    let out = fleetline(&["enumerate", path_str(&path)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "R\ntotal: 1\n");
}

#[test]
fn derive_emits_bindings_for_initial_selection() {
    let dir = common::scenarios_dir();
    let out = fleetline(&[
        "derive",
        path_str(&dir.join("irrigation-model.json")),
        path_str(&dir.join("irrigation.json")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let config: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("json output");
    assert_eq!(
        config["selection"],
        serde_json::json!(["Fleet", "Sensing", "SoilMoisture", "Tap"])
    );
    assert_eq!(config["bindings"]["SoilMoisture"], "d1");
    assert_eq!(config["bindings"]["Tap"], "d4");
}

#[test]
fn derive_rejects_invalid_selection_with_exit_1() {
    let dir = common::scenarios_dir();
    let out = fleetline(&[
        "derive",
        path_str(&dir.join("irrigation-model.json")),
        path_str(&dir.join("irrigation.json")),
        "--selection",
        "Fleet,Sensing,SoilMoisture,Sprinkler,Tap",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).starts_with("invalid:"), "{}", stdout_of(&out));
}

#[test]
fn run_missing_scenario_is_runtime_error() {
    let out = fleetline(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_until_zero_is_usage_error() {
    let scenario = common::scenarios_dir().join("steady.json");
    let out = fleetline(&["run", path_str(&scenario), "--until", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("error:"));
}

#[test]
fn run_reports_unreadable_model_reference_as_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = common::scenarios_dir().join("steady.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&scenario).unwrap()).unwrap();
    doc["model"] = serde_json::json!("missing-model.json");
    let path = dir.path().join("dangling.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = fleetline(&["run", path_str(&path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("error:"));
}

#[test]
fn run_rejects_invalid_initial_selection_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = common::scenarios_dir();
    std::fs::copy(
        scenarios.join("irrigation-model.json"),
        dir.path().join("irrigation-model.json"),
    )
    .unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenarios.join("steady.json")).unwrap())
            .unwrap();
    doc["initial_selection"] = serde_json::json!(["Fleet", "Sensing"]);
    let path = dir.path().join("invalid-initial.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = fleetline(&["run", path_str(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("error:"));
}

#[test]
fn run_streams_trace_lines_on_stdout_and_summary_on_stderr() {
    let scenario = common::scenarios_dir().join("irrigation.json");
    let out = fleetline(&["run", path_str(&scenario), "--until", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let events = read_trace(out.stdout.as_slice()).expect("stdout is pure JSONL");
    assert!(!events.is_empty());
    let summary = stderr_of(&out);
    assert!(summary.contains("adaptations:"), "{summary}");
    assert!(summary.contains("final_effective:"), "{summary}");
}

#[test]
fn run_then_replay_round_trips_and_repeats_identically() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = common::scenarios_dir().join("irrigation_fault.json");
    let trace_a = dir.path().join("a.jsonl");
    let trace_b = dir.path().join("b.jsonl");
    for trace in [&trace_a, &trace_b] {
        let out = fleetline(&[
            "run",
            path_str(&scenario),
            "--until",
            "80",
            "--seed",
            "7",
            "--trace",
            path_str(trace),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
        assert!(stdout_of(&out).contains("adaptations: 1"));
    }
    assert_eq!(
        std::fs::read(&trace_a).unwrap(),
        std::fs::read(&trace_b).unwrap(),
        "same seed, different bytes"
    );

    let replay = fleetline(&["replay", path_str(&trace_a)]);
    assert_eq!(replay.status.code(), Some(0));
    let text = stdout_of(&replay);
    assert!(text.lines().next().unwrap().starts_with("events: "));
    assert_eq!(text.lines().last().unwrap(), "ok");
    assert!(text.contains("adaptations: 1"), "{text}");
}

/// Deleting the Plan event that licensed an Adapt must trip the replay
/// gate, naming the broken rule.
#[test]
fn replay_flags_tampered_trace_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = common::scenarios_dir().join("irrigation.json");
    let trace_path = dir.path().join("trace.jsonl");
    let out = fleetline(&[
        "run",
        path_str(&scenario),
        "--until",
        "60",
        "--trace",
        path_str(&trace_path),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let events: Vec<TraceEvent> = {
        let file = std::fs::File::open(&trace_path).unwrap();
        read_trace(std::io::BufReader::new(file)).unwrap()
    };
    let adapt_t = events
        .iter()
        .find(|e| e.kind == TraceKind::Adapt)
        .expect("run adapts at least once")
        .t;
    let tampered: Vec<&TraceEvent> = events
        .iter()
        .filter(|e| !(e.kind == TraceKind::Plan && e.t == adapt_t))
        .collect();
    let mut text = String::new();
    for event in tampered {
        text.push_str(&event.to_line());
        text.push('\n');
    }
    let tampered_path = dir.path().join("tampered.jsonl");
    std::fs::write(&tampered_path, text).unwrap();

    let replay = fleetline(&["replay", path_str(&tampered_path)]);
    assert_eq!(replay.status.code(), Some(1));
    assert!(
        stdout_of(&replay).starts_with("violation: adapt-after-plan"),
        "{}",
        stdout_of(&replay)
    );
}

#[test]
fn replay_truncated_file_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = common::scenarios_dir().join("steady.json");
    let trace_path = dir.path().join("trace.jsonl");
    let out = fleetline(&[
        "run",
        path_str(&scenario),
        "--until",
        "12",
        "--trace",
        path_str(&trace_path),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let text = std::fs::read_to_string(&trace_path).unwrap();
    let trimmed = text.trim_end();
    let last_newline = trimmed.rfind('\n').expect("multi-line trace");
    let cut = last_newline + 1 + (trimmed.len() - last_newline) / 2;
    std::fs::write(&trace_path, &text[..cut]).unwrap();

    let replay = fleetline(&["replay", path_str(&trace_path)]);
    assert_eq!(replay.status.code(), Some(3));
    assert!(stderr_of(&replay).contains("error:"));
}

#[test]
fn replay_missing_file_is_runtime_error() {
    let out = fleetline(&["replay", "/nonexistent/trace.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("cannot read"));
}
