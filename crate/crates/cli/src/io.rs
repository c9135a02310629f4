//! File formats, output envelopes and exit codes.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use solgroup::Error;

pub const VERSION: &str = concat!("solgroup ", env!("CARGO_PKG_VERSION"));

/// Exit status of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    CheckFailed = 1,
    Usage = 2,
    Resource = 3,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { exit: Exit::Usage, kind: "usage", message: message.into() }
    }

    pub fn to_json(&self) -> Value {
        json!({ "version": VERSION, "error": self.kind, "message": self.message, "exit_code": self.exit as i32 })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (exit, kind) = match &e {
            Error::CoxeterCapExceeded { .. } => (Exit::Resource, "coxeter_cap_exceeded"),
            Error::TooLarge { .. } => (Exit::Resource, "too_large"),
            Error::SpectralGapFailure { .. } => (Exit::CheckFailed, "spectral_gap_failure"),
            Error::NotGoodStrategy(_) => (Exit::CheckFailed, "not_good_strategy"),
            Error::InvalidArgument(_) => (Exit::Usage, "invalid_argument"),
            Error::InvalidMachine(_) => (Exit::Usage, "invalid_machine"),
            Error::NondeterministicMachine(..) => (Exit::Usage, "nondeterministic_machine"),
            Error::IndexError(_) => (Exit::Usage, "index_error"),
            Error::TriangularityViolation { .. } => (Exit::Usage, "triangularity_violation"),
            Error::InvalidContext(_) => (Exit::Usage, "invalid_context"),
            Error::RelatorViolation(_) => (Exit::Usage, "relator_violation"),
            Error::ScenarioMismatch(_) => (Exit::Usage, "scenario_mismatch"),
            Error::InvariantViolation(_) => (Exit::Usage, "invariant_violation"),
            Error::NotPrimitiveRoot { .. } => (Exit::Usage, "not_primitive_root"),
            Error::ConstraintViolation(_) => (Exit::Usage, "constraint_violation"),
            Error::NotUnitary(_) => (Exit::Usage, "not_unitary"),
        };
        Failure { exit, kind, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Reads a JSON file, unwrapping the `{"version", "kind", "data"}` envelope
/// this tool writes.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut v: Value =
        serde_json::from_str(&text).map_err(|e| Failure { exit: Exit::Usage, kind: "parse", message: format!("{}: {e}", path.display()) })?;
    if let Some(obj) = v.as_object_mut() {
        if obj.contains_key("version") && obj.contains_key("data") {
            v = obj.remove("data").expect("checked");
        }
    }
    serde_json::from_value(v).map_err(|e| Failure { exit: Exit::Usage, kind: "parse", message: format!("{}: {e}", path.display()) })
}

pub fn envelope(kind: &str, data: impl Serialize) -> CliResult<Value> {
    let data = serde_json::to_value(data).map_err(|e| Failure { exit: Exit::Usage, kind: "serialize", message: e.to_string() })?;
    Ok(json!({ "version": VERSION, "kind": kind, "data": data }))
}

pub fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).expect("values serialize");
    fs::write(path, text + "\n").map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Command output: the document to print and the exit status.
pub struct Outcome {
    pub doc: Value,
    pub exit: Exit,
}

impl Outcome {
    pub fn ok(kind: &str, data: impl Serialize) -> CliResult<Self> {
        Ok(Outcome { doc: envelope(kind, data)?, exit: Exit::Ok })
    }

    /// Exit 0 when `pass`, 1 otherwise.
    pub fn check(kind: &str, data: impl Serialize, pass: bool) -> CliResult<Self> {
        Ok(Outcome { doc: envelope(kind, data)?, exit: if pass { Exit::Ok } else { Exit::CheckFailed } })
    }
}
