use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use dpwkit::DpwError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// The machine-readable error report: `{kind, message, location, residual}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub location: Option<Value>,
    pub residual: Option<f64>,
    #[serde(skip)]
    pub exit_code: i32,
}

impl CliError {
    pub fn schema(message: impl Into<String>) -> Self {
        Self {
            kind: "schema".into(),
            message: message.into(),
            location: None,
            residual: None,
            exit_code: EXIT_INPUT,
        }
    }

    pub fn json(e: &serde_json::Error, file: Option<&Path>) -> Self {
        let mut loc = json!({ "line": e.line(), "column": e.column() });
        if let Some(f) = file {
            loc["file"] = json!(f.display().to_string());
        }
        Self::schema(e.to_string()).at(loc)
    }

    pub fn io(path: &Path, e: &std::io::Error) -> Self {
        Self {
            kind: "io".into(),
            message: e.to_string(),
            location: Some(json!({ "file": path.display().to_string() })),
            residual: None,
            exit_code: EXIT_INPUT,
        }
    }

    pub fn at(mut self, location: Value) -> Self {
        self.location = Some(location);
        self
    }

    pub fn in_file(self, path: &Path) -> Self {
        let mut loc = self.location.clone().unwrap_or_else(|| json!({}));
        loc["file"] = json!(path.display().to_string());
        self.at(loc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable error")
    }
}

impl From<DpwError> for CliError {
    fn from(e: DpwError) -> Self {
        let location = match &e {
            DpwError::PoleOnPath { pole } => Some(json!({ "z": [pole.re, pole.im] })),
            DpwError::IntegrationFailure { at, .. } => Some(json!({ "z": [at.re, at.im] })),
            DpwError::SingularFrame { index } => Some(json!({ "index": index })),
            _ => None,
        };
        Self {
            kind: e.kind().into(),
            message: e.to_string(),
            location,
            residual: e.residual(),
            exit_code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}
