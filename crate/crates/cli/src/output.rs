//! Output envelope, destinations and exit codes.

use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

pub const TOOL: &str = "quadqk";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure with its exit code; printed to stderr as one JSON line.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn usage(kind: &str, message: impl ToString) -> Self {
        Self { code: EXIT_USAGE, kind: kind.into(), message: message.to_string() }
    }

    pub fn numerical(kind: &str, message: impl ToString) -> Self {
        Self { code: EXIT_NUMERICAL, kind: kind.into(), message: message.to_string() }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message, "exit_code": self.code }).to_string()
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self { code: EXIT_NUMERICAL, kind: "IoError".into(), message: e.to_string() }
    }
}

pub fn envelope(command: &str, params: Value, result: impl Serialize) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "params": params,
        "result": result,
    })
}

/// Header comment lines carrying the envelope metadata for CSV output.
pub fn csv_preamble(command: &str, params: &Value) -> String {
    format!("# {TOOL} {VERSION} {command}\n# params {params}\n")
}

pub fn open(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}
