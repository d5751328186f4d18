//! JSON config files. Keys are flag names with `_` for `-`; a flag given on
//! the command line always wins over the file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub fn load(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(format!("config {} must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Usage(format!("config {}: {e}", path.display()))),
    }
}

/// Fills every unset (`None`) field of `args` from `config`.
pub fn merge<T: Serialize + DeserializeOwned>(args: T, config: &Map<String, Value>) -> Result<T, CliError> {
    let mut value = serde_json::to_value(&args).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Value::Object(fields) = &mut value {
        for (key, slot) in fields.iter_mut() {
            if slot.is_null() {
                if let Some(v) = config.get(key) {
                    *slot = v.clone();
                }
            }
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config: {e}")))
}
