use std::path::PathBuf;
use std::time::{Duration, Instant};

use pacsynth::dsl::{Sort, Value};
use pacsynth::harness::{cmd_run, RunOptions};
use pacsynth::oracle::{ExternalTarget, OracleError};
use pacsynth::{Error, Task};
use serde_json::json;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn spawn(cmd: &str, timeout: Duration) -> ExternalTarget {
    ExternalTarget::spawn(cmd, Some(&fixtures()), timeout).unwrap()
}

#[test]
fn uppercase_round_trip() {
    let mut t = spawn("python3 upper.py", Duration::from_secs(10));
    let out = t.query(&json!({"x": "aB1"}), Sort::String).unwrap();
    assert_eq!(out, Value::Str("AB1".into()));
    let out = t.query(&json!({"x": "é z"}), Sort::String).unwrap();
    assert_eq!(out, Value::Str("É Z".into()));
    t.shutdown().unwrap();
}

#[test]
fn line_echo_target() {
    let script = r#"while read -r line; do [ "$line" = exit ] && exit 0; echo '{"output": 7}'; done"#;
    let mut t = spawn(script, Duration::from_secs(10));
    assert_eq!(t.query(&json!({"n": 1}), Sort::Int).unwrap(), Value::Int(7));
    assert_eq!(t.query(&json!({"n": 2}), Sort::Int).unwrap(), Value::Int(7));
    t.shutdown().unwrap();
}

#[test]
fn non_json_response_is_malformed() {
    let mut t = spawn("while read -r line; do echo hello; done", Duration::from_secs(10));
    let err = t.query(&json!({"x": "a"}), Sort::String).unwrap_err();
    assert!(matches!(err, OracleError::Malformed { ref response, .. } if response == "hello"), "{err}");
}

#[test]
fn wrong_output_sort_is_malformed() {
    let mut t = spawn(r#"while read -r line; do echo '{"output": "x"}'; done"#, Duration::from_secs(10));
    let err = t.query(&json!({"x": "a"}), Sort::Int).unwrap_err();
    assert!(matches!(err, OracleError::Malformed { .. }), "{err}");
}

#[test]
fn silent_target_times_out() {
    let mut t = spawn("sleep 30", Duration::from_millis(300));
    let start = Instant::now();
    let err = t.query(&json!({"x": "a"}), Sort::String).unwrap_err();
    assert!(matches!(err, OracleError::Timeout { .. }), "{err}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn early_exit_is_reported() {
    let mut t = spawn("read -r line; exit 3", Duration::from_secs(10));
    let err = t.query(&json!({"x": "a"}), Sort::String).unwrap_err();
    assert!(matches!(err, OracleError::Exited { .. }), "{err}");
}

#[test]
fn nonzero_status_on_shutdown_is_an_error() {
    let t = spawn("while read -r line; do [ \"$line\" = exit ] && exit 4; done", Duration::from_secs(10));
    assert!(matches!(t.shutdown(), Err(OracleError::Exited { .. })));
}

#[test]
fn missing_command_fails_on_first_query() {
    let mut t = spawn("definitely-not-a-command-xyz", Duration::from_secs(10));
    assert!(t.query(&json!({"x": "a"}), Sort::String).is_err());
}

#[test]
fn synthesizes_against_external_target() {
    let task = Task::load(&fixtures().join("first_external.json")).unwrap();
    let report = cmd_run(&task, &RunOptions { seed: 3, ..RunOptions::default() }).unwrap();
    let program = report.program.as_ref().expect("a program");
    assert_eq!(program.text, "(at x 0)");
    assert!(report.correct());
    assert!(report.held_out.as_ref().unwrap().exact);
}

#[test]
fn external_failure_surfaces_as_oracle_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(
        &path,
        json!({
            "name": "broken",
            "inputs": [{"name": "x", "sort": "string"}],
            "target": {"kind": "command", "value": "exit 1"},
            "distribution": {"kind": "uniform_string"}
        })
        .to_string(),
    )
    .unwrap();
    let task = Task::load(&path).unwrap();
    let err = cmd_run(&task, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Oracle(_)), "{err}");
    assert_eq!(pacsynth::harness::exit_code(&err), 5);
}
