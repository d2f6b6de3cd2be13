use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Sidecar recorded next to every output.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Non-path parameters of the run.
    pub parameters: serde_json::Value,
    pub config_sha256: String,
    /// Input name to SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    /// Output file name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, config_sha256: String) -> Self {
        Provenance {
            tool: "vesselfuse",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            parameters: serde_json::Value::Null,
            config_sha256,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn parameters<S: Serialize>(mut self, p: &S) -> Self {
        self.parameters = serde_json::to_value(p).unwrap_or(serde_json::Value::Null);
        self
    }

    /// Flat key/value form for embedding in a report.
    pub fn to_map(&self) -> BTreeMap<String, serde_json::Value> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> CliResult<()> {
        self.inputs.insert(name.into(), file_sha256(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.insert(name, file_sha256(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(self, path)
    }
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(anyhow::anyhow!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.into()))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Data(anyhow::anyhow!("cannot write {}: {e}", path.display())))
}
