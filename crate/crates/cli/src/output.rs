use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Inconclusive,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 2,
            Status::Inconclusive => 3,
        }
    }
}

/// What a subcommand hands back for the JSON record.
pub struct Outcome {
    pub status: Status,
    pub result: Value,
}

/// The JSON document written for every run.
#[derive(Serialize)]
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub version: &'static str,
    pub seed: u64,
    pub status: Status,
    pub config: &'a ExperimentConfig,
    pub result: Option<Value>,
    pub error: Option<Value>,
}

pub fn error_record(e: &CliError) -> Value {
    use gcf_core::Error as E;
    let (kind, detail) = match e {
        CliError::Config(_) => ("config", Value::Null),
        CliError::Output(_) => ("output", Value::Null),
        CliError::Math(m) => match m {
            E::MaxEntBoundary { alpha, min, max } => {
                ("maxent_boundary", json!({ "alpha": alpha, "min": min, "max": max }))
            }
            E::NotConverged {
                iterations,
                primal_residual,
                dual_residual,
            } => (
                "not_converged",
                json!({ "iterations": iterations, "primal_residual": primal_residual, "dual_residual": dual_residual }),
            ),
            E::NoCertificate { kprime, mu } => ("no_certificate", json!({ "kprime": kprime, "mu": mu })),
            E::Overflow { n, word, exponent } => ("overflow", json!({ "n": n, "word": word, "exponent": exponent })),
            E::Infeasible(_) => ("infeasible", Value::Null),
            E::Budget(_) => ("budget", Value::Null),
            _ => ("math", Value::Null),
        },
    };
    json!({ "kind": kind, "message": e.to_string(), "detail": detail })
}

/// Writes into a single output directory, creating it on first use.
pub struct Emitter {
    dir: PathBuf,
}

impl Emitter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    /// Header row from the record's field names, LF line endings.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.dir.join(format!("{name}.csv"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(())
    }
}

/// Symbols concatenated when every symbol is a single digit, dot-separated otherwise.
pub fn word_label(symbols: &[u8], r: usize) -> String {
    let parts: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
    if r <= 10 {
        parts.concat()
    } else {
        parts.join(".")
    }
}
