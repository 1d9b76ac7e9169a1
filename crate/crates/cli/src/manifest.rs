use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Written next to every output set. Feeding it back through `--config`
/// reproduces the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Subcommand path, e.g. `exp convergence`.
    pub command: String,
    pub resolved_config: Value,
    pub base_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Reads a plan from a config file. A run manifest is accepted in place of a
/// plain config when its command matches.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path, command: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file {} is not valid JSON: {e}", path.display())))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(resolved) = obj.remove("resolved_config") {
            let recorded = obj.get("command").and_then(Value::as_str).unwrap_or_default();
            if recorded != command {
                return Err(CliError::Usage(format!(
                    "manifest {} was written by `{recorded}`, not `{command}`",
                    path.display()
                )));
            }
            value = resolved;
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
}
