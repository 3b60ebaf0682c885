use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Tool version, input hashes and the echoed configuration of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Input path -> sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config: impl Serialize) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            inputs: BTreeMap::new(),
            config: serde_json::to_value(config).expect("config serializes"),
        }
    }

    pub fn hash_input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    /// Content hash for inputs that are generated in memory.
    pub fn hash_text(&mut self, label: &str, text: &str) {
        self.inputs
            .insert(label.to_string(), hex::encode(Sha256::digest(text.as_bytes())));
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("provenance serializes")
    }

    /// Comment lines for CSV outputs.
    pub fn header(&self) -> Vec<String> {
        let mut lines = vec![
            format!("{} {} {}", self.tool, self.version, self.command),
            format!("config {}", self.config),
        ];
        lines.extend(self.inputs.iter().map(|(p, h)| format!("input {p} sha256={h}")));
        lines
    }
}

/// Writes `value` as pretty JSON with a top-level `provenance` field.
pub fn write_json_with(path: &Path, value: impl Serialize, provenance: &Provenance) -> CliResult<()> {
    let mut value = serde_json::to_value(value).expect("value serializes");
    let prov = provenance.to_value();
    match value.as_object_mut() {
        Some(obj) => {
            obj.insert("provenance".into(), prov);
        }
        None => value = serde_json::json!({ "value": value, "provenance": prov }),
    }
    battdispatch_core::dispatch::write_json(path, &value)?;
    Ok(())
}
