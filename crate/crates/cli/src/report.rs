//! Report envelope, input loading and exit-code mapping.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use freeholo::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "freeholo/1";

/// Failures, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 2: unreadable file, malformed JSON, bad shape or syntax.
    Input(String),
    /// Exit code 1: the computation itself failed.
    Math(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Syntax { .. }
            | Error::UnknownVariable { .. }
            | Error::ShapeMismatch(_)
            | Error::NonFinite { .. } => CliError::Input(e.to_string()),
            other => CliError::Math(other),
        }
    }
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Math(_) => 1,
        }
    }

    fn kind(&self) -> String {
        match self {
            CliError::Input(_) => "input".into(),
            CliError::Math(e) => {
                let dbg = format!("{e:?}");
                dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
            }
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Math(e) => e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Accepts either a single JSON value or an array of them.
pub fn load_many<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let value: Value = load(path)?;
    let parsed = match value {
        Value::Array(_) => serde_json::from_value(value),
        single => serde_json::from_value(single).map(|v| vec![v]),
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Common header fields of every report.
pub struct Header {
    pub command: &'static str,
    pub tol: f64,
    pub seed: u64,
}

/// Outcome of a subcommand: payload fields and whether the check passed.
pub struct Report {
    pub pass: bool,
    pub fields: Map<String, Value>,
}

impl Report {
    pub fn new(pass: bool) -> Self {
        Report { pass, fields: Map::new() }
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.fields.insert(key.to_string(), value);
        self
    }
}

fn envelope(h: &Header, status: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(h.command));
    m.insert("tol".into(), json!(h.tol));
    m.insert("seed".into(), json!(h.seed));
    m.insert("status".into(), json!(status));
    m
}

fn emit(doc: Map<String, Value>, out: Option<&PathBuf>) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json values serialize");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes the report (or an error record) and picks the exit code.
pub fn finish(h: &Header, result: CliResult<Report>, out: Option<&PathBuf>) -> ExitCode {
    let (doc, code) = match result {
        Ok(report) => {
            let mut doc = envelope(h, if report.pass { "pass" } else { "fail" });
            doc.extend(report.fields);
            (doc, u8::from(!report.pass))
        }
        Err(err) => {
            eprintln!("error: {}", err.message());
            let mut doc = envelope(h, "error");
            doc.insert("error".into(), json!({ "kind": err.kind(), "message": err.message() }));
            (doc, err.code())
        }
    };
    match emit(doc, out) {
        Ok(()) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
