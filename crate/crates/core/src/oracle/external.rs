//! Line-oriented JSON protocol for target programs in other languages.
//!
//! Each request is one line `{"inputs": {...}}`; each response is one line
//! `{"output": ...}`. The runner sends `exit` when done.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::OracleError;
use crate::dsl::{Sort, Value};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

pub struct ExternalTarget {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ExternalTarget {
    /// Starts `sh -c command` in `dir`.
    pub fn spawn(command: &str, dir: Option<&Path>, timeout: Duration) -> Result<Self, OracleError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::inherit());
        if let Some(d) = dir {
            cmd.current_dir(d);
        }
        let mut child = cmd.spawn().map_err(|source| OracleError::Spawn { command: command.into(), source })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExternalTarget { command: command.into(), child, stdin, lines, timeout })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Sends one request and waits for its response.
    pub fn query(&mut self, inputs: &serde_json::Value, sort: Sort) -> Result<Value, OracleError> {
        let request = serde_json::json!({ "inputs": inputs }).to_string();
        let input = inputs.to_string();
        let sent = self.stdin.as_mut().map(|w| writeln!(w, "{request}").and_then(|_| w.flush()));
        if !matches!(sent, Some(Ok(()))) {
            return Err(self.exited(input));
        }
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(OracleError::Io(e)),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                return Err(OracleError::Timeout { input, secs: self.timeout.as_secs_f64() });
            }
            Err(RecvTimeoutError::Disconnected) => return Err(self.exited(input)),
        };
        let malformed =
            |reason: String| OracleError::Malformed { input: input.clone(), response: line.clone(), reason };
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let out = v.get("output").ok_or_else(|| malformed("missing `output`".into()))?;
        Value::from_json(out, sort).ok_or_else(|| malformed(format!("`output` is not a {sort}")))
    }

    fn exited(&mut self, input: String) -> OracleError {
        let deadline = Instant::now() + Duration::from_secs(1);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(s)) => break s.to_string(),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => break "closed its output".into(),
            }
        };
        OracleError::Exited { input, status }
    }

    /// Sends `exit` and waits for the process. A nonzero status is an error.
    pub fn shutdown(mut self) -> Result<(), OracleError> {
        if let Some(mut w) = self.stdin.take() {
            let _ = writeln!(w, "exit");
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            match self.child.try_wait()? {
                Some(s) if s.success() => return Ok(()),
                Some(s) => return Err(OracleError::Exited { input: "exit".into(), status: s.to_string() }),
                None if Instant::now() >= deadline => {
                    let _ = self.child.kill();
                    return Err(OracleError::Timeout { input: "exit".into(), secs: self.timeout.as_secs_f64() });
                }
                None => thread::sleep(Duration::from_millis(5)),
            }
        }
    }
}

impl Drop for ExternalTarget {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
