//! JSON reports with a reproducibility provenance block.

use serde::Serialize;
use serde_json::Value;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Attaches the provenance block to a report body.
pub fn report(command: &str, cfg: &RunConfig, seed: Option<u64>, body: Value) -> Value {
    let prov = Provenance {
        tool: "nvquench",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_sha256: cfg.sha256(),
        seed,
    };
    let mut out = body;
    if let Value::Object(ref mut obj) = out {
        obj.insert(
            "provenance".to_string(),
            serde_json::to_value(prov).expect("provenance serialises"),
        );
    }
    out
}

/// Writes a JSON value to `out`, or stdout when absent.
pub fn emit(value: &Value, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serialises") + "\n";
    write_text(&text, out)
}

pub fn write_text(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
