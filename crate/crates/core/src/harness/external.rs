//! One-shot subprocess protocol: the evaluator receives a single JSON
//! request line on stdin and must answer with a single JSON response line on
//! stdout.
//!
//! ```text
//! -> {"id":"3-0","params":{"lr":0.001,"model":"vgg"}}
//! <- {"id":"3-0","outcome":0.91,"aux":{"train_accuracy":0.998}}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde_json::{json, Map, Value as Json};

use super::{EvaluationResult, Evaluator};
use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace, Value};

pub const DEFAULT_TIMEOUT_SECS: f64 = 3600.0;

#[derive(Debug, Clone)]
pub struct ExternalEvaluator {
    command: Vec<String>,
    timeout: Duration,
    names: Vec<String>,
}

fn find_program(program: &str) -> bool {
    if program.contains('/') {
        return Path::new(program).is_file();
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|dir| dir.join(program).is_file()))
        .unwrap_or(false)
}

impl ExternalEvaluator {
    pub fn new(command: Vec<String>, timeout: Duration, space: &SearchSpace) -> Result<Self> {
        let program = command
            .first()
            .ok_or_else(|| Error::Validation("external command is empty".into()))?;
        if !find_program(program) {
            return Err(Error::Evaluator(format!("command not found: {program}")));
        }
        Ok(Self {
            command,
            timeout,
            names: space.dimensions().iter().map(|d| d.name.clone()).collect(),
        })
    }

    pub fn request_line(&self, id: &str, config: &Configuration) -> String {
        let params: Map<String, Json> = self
            .names
            .iter()
            .zip(&config.values)
            .map(|(n, v)| {
                let j = match v {
                    Value::Number(x) => json!(x),
                    Value::Label(s) => json!(s),
                };
                (n.clone(), j)
            })
            .collect();
        json!({ "id": id, "params": params }).to_string()
    }

    fn run(&self, id: &str, config: &Configuration) -> std::result::Result<EvaluationResult, String> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("spawn failed: {e}"))?;
        let deadline = Instant::now() + self.timeout;

        if let Some(mut stdin) = child.stdin.take() {
            // a child that exits without reading stdin is judged by its output
            let _ = writeln!(stdin, "{}", self.request_line(id, config));
        }
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut line = String::new();
            let r = BufReader::new(stdout).read_line(&mut line).map(|_| line);
            let _ = tx.send(r);
        });

        let kill = |child: &mut std::process::Child| {
            let _ = child.kill();
            let _ = child.wait();
        };
        let line = match rx.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                kill(&mut child);
                return Err(format!("reading response failed: {e}"));
            }
            Err(_) => {
                kill(&mut child);
                return Err("timeout".into());
            }
        };
        let status = loop {
            match child.try_wait() {
                Ok(Some(s)) => break s,
                Ok(None) if Instant::now() >= deadline => {
                    kill(&mut child);
                    return Err("timeout".into());
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err(format!("wait failed: {e}")),
            }
        };
        if !status.success() {
            return Err(format!("nonzero exit status: {status}"));
        }
        parse_response(id, &line)
    }
}

/// Validates one response line against the request id.
pub fn parse_response(id: &str, line: &str) -> std::result::Result<EvaluationResult, String> {
    let line = line.trim();
    if line.is_empty() {
        return Err("empty response".into());
    }
    let value: Json = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => {
            let lenient = line
                .replace("-Infinity", "null")
                .replace("Infinity", "null")
                .replace("NaN", "null");
            return match serde_json::from_str::<Json>(&lenient) {
                Ok(_) => Err("non-finite outcome".into()),
                Err(_) => Err(format!("malformed response: {e}")),
            };
        }
    };
    let obj = value.as_object().ok_or("response is not a JSON object")?;
    match obj.get("id").and_then(Json::as_str) {
        Some(got) if got == id => {}
        Some(got) => return Err(format!("id mismatch: expected `{id}`, got `{got}`")),
        None => return Err("response has no string id".into()),
    }
    let outcome = match obj.get("outcome") {
        Some(Json::Number(n)) => n.as_f64().ok_or("outcome is not representable")?,
        Some(Json::Null) => return Err("non-finite outcome".into()),
        Some(Json::String(s)) => match s.parse::<f64>() {
            Ok(v) if !v.is_finite() => return Err("non-finite outcome".into()),
            _ => return Err("outcome is not a number".into()),
        },
        Some(_) => return Err("outcome is not a number".into()),
        None => return Err("response has no outcome".into()),
    };
    if !outcome.is_finite() {
        return Err("non-finite outcome".into());
    }
    let mut aux = BTreeMap::new();
    match obj.get("aux") {
        None | Some(Json::Null) => {}
        Some(Json::Object(m)) => {
            for (k, v) in m {
                let v = v.as_f64().ok_or_else(|| format!("aux `{k}` is not a number"))?;
                aux.insert(k.clone(), v);
            }
        }
        Some(_) => return Err("aux is not an object".into()),
    }
    let mut r = EvaluationResult::ok(outcome);
    r.aux = aux;
    Ok(r)
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&self, id: &str, config: &Configuration) -> EvaluationResult {
        let start = Instant::now();
        let mut r = self.run(id, config).unwrap_or_else(EvaluationResult::failed);
        r.duration = start.elapsed().as_secs_f64();
        r
    }
}
