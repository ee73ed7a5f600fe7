//! Exit codes, JSON emission and error classification.

use std::fmt;
use std::io::Write;
use std::process::ExitCode;

use jmsteer::error::Error;
use jmsteer::lhv::round12;
use serde_json::{json, Value};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// A finished command: the JSON payload and whether the verdict was negative.
pub struct Outcome {
    pub payload: Value,
    pub negative: bool,
}

impl Outcome {
    pub fn ok(payload: Value) -> Self {
        Self { payload, negative: false }
    }

    pub fn verdict(payload: Value, positive: bool) -> Self {
        Self {
            payload,
            negative: !positive,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
    /// Offending location inside a JSON input, when known.
    pub path: Option<String>,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
            path: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = if self.code == EXIT_NUMERICAL { "numerical_failure" } else { "input_error" };
        let mut err = json!({"kind": kind, "message": self.message});
        if let Some(p) = &self.path {
            err["path"] = json!(p);
        }
        json!({ "error": err })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericalFailure(_) | Error::NonConvergence { .. } => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        let message = e.to_string();
        // decoder messages look like "malformed input: at `povms[1][0]`: ..."
        let path = match &e {
            Error::Parse(m) => m
                .strip_prefix("at `")
                .and_then(|rest| rest.split_once('`'))
                .map(|(p, _)| p.to_string()),
            _ => None,
        };
        Self { code, message, path }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::input(format!("invalid JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::input(format!("csv: {e}"))
    }
}

/// Rounds every float in the tree to 12 significant digits.
pub fn round_tree(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            serde_json::Number::from_f64(round12(x)).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_tree).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_tree(v))).collect()),
        other => other,
    }
}

pub fn render(v: &Value) -> String {
    serde_json::to_string_pretty(&round_tree(v.clone())).expect("json renders")
}

fn emit(v: &Value) {
    // a closed pipe is not worth a panic
    let _ = writeln!(std::io::stdout().lock(), "{}", render(v));
}

pub fn finish(result: Result<Outcome, CliError>) -> ExitCode {
    match result {
        Ok(out) => {
            emit(&out.payload);
            ExitCode::from(if out.negative { EXIT_NEGATIVE } else { EXIT_OK })
        }
        Err(e) => {
            eprintln!("error: {e}");
            emit(&e.to_json());
            ExitCode::from(e.code)
        }
    }
}
