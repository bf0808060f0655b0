//! The JSON report written by every command.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use canosc::CoefficientField;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::SystemConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub source: SystemConfig,
    pub label: String,
    pub fingerprint: String,
    pub notes: Vec<String>,
}

impl SystemReport {
    pub fn new(source: &SystemConfig, field: &CoefficientField) -> Self {
        SystemReport {
            source: source.clone(),
            label: field.label().to_string(),
            fingerprint: field.fingerprint(),
            notes: field.notes().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub version: String,
    pub exit_code: i32,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unix_time: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub system: Option<SystemReport>,
    pub command: String,
    pub result: Value,
    pub policy: Value,
    pub diagnostics: Diagnostics,
}

/// What a command hands back before the report is assembled.
pub struct Outcome {
    pub system: Option<SystemReport>,
    pub result: Value,
    pub policy: Value,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: String,
    pub exit_code: i32,
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

impl Report {
    pub fn assemble(command: &str, out: Outcome, deterministic: bool, elapsed: f64) -> Report {
        let unix_time = (!deterministic).then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Report {
            system: out.system,
            command: command.to_string(),
            result: out.result,
            policy: out.policy,
            diagnostics: Diagnostics {
                version: env!("CARGO_PKG_VERSION").to_string(),
                exit_code: out.exit_code,
                notes: out.notes,
                warnings: out.warnings,
                unix_time,
                elapsed_seconds: (!deterministic).then_some(elapsed),
            },
        }
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes to `path`, or to stdout when there is none.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        let text = self.render();
        match path {
            Some(p) => {
                std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
            }
            None => {
                use std::io::Write;
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))
            }
        }
    }
}
