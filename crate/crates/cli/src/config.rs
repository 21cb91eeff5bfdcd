//! Flag and config-file merging. Each subcommand has a flag struct whose
//! fields are all optional and a resolved struct with defaults; the JSON file
//! is applied first and explicitly given flags override it.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// A problem with the arguments or the config file (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub fn load_config_file(path: &Path) -> Result<Map<String, Value>, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(usage(format!("config {} must be a JSON object", path.display()))),
        Err(e) => Err(usage(format!("config {}: {e}", path.display()))),
    }
}

/// Config values, then flags, deserialized into `R` (missing keys take `R`'s defaults).
pub fn resolve<F: Serialize, R: DeserializeOwned>(file: Option<&Map<String, Value>>, flags: &F) -> Result<R, UsageError> {
    let mut merged = file.cloned().unwrap_or_default();
    match serde_json::to_value(flags).map_err(|e| usage(e.to_string()))? {
        Value::Object(given) => merged.extend(given),
        other => unreachable!("flag struct serialized to {other}"),
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))
}

/// Parses a flag value through the type's serde names, so flags and config
/// files accept the same spelling.
pub fn parse_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}
