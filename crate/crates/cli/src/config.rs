use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::{Failure, GlobalOpts};

fn merge_key(map: &mut Map<String, Value>, key: &str, value: Value, origin: &str) -> Result<(), Failure> {
    match map.get_mut(key) {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => {
            let mut known: Vec<&String> = map.keys().collect();
            known.sort();
            let known: Vec<&str> = known.iter().map(|s| s.as_str()).collect();
            Err(Failure::user(format!(
                "unknown config key '{key}' in {origin} (known keys: {})",
                known.join(", ")
            )))
        }
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Builds a configuration: `defaults`, then the `--config` file, then
/// `flags` (key, JSON value) pairs, then `--set` overrides.
pub fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    global: &GlobalOpts,
    flags: Vec<(&str, Value)>,
) -> Result<T, Failure> {
    let Value::Object(mut map) = serde_json::to_value(defaults).map_err(|e| Failure::user(e.to_string()))? else {
        return Err(Failure::user("configuration is not a JSON object"));
    };
    if let Some(path) = &global.config {
        let text = read(path)?;
        let file: Value =
            serde_json::from_str(&text).map_err(|e| Failure::user(format!("{}: invalid JSON: {e}", path.display())))?;
        let Value::Object(file) = file else {
            return Err(Failure::user(format!("{}: expected a JSON object", path.display())));
        };
        for (k, v) in file {
            merge_key(&mut map, &k, v, &path.display().to_string())?;
        }
    }
    for (k, v) in flags {
        merge_key(&mut map, k, v, "command-line flags")?;
    }
    for raw in &global.overrides {
        let Some((k, v)) = raw.split_once('=') else {
            return Err(Failure::user(format!("override '{raw}' is not of the form key=value")));
        };
        merge_key(&mut map, k.trim(), parse_value(v.trim()), "--set")?;
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| Failure::user(format!("invalid configuration: {e}")))
}

pub fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::user(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure {
        code: 3,
        message: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

/// `(key, value)` for a flag that was given.
pub fn flag<T: Serialize>(key: &'static str, v: &Option<T>) -> Option<(&'static str, Value)> {
    v.as_ref()
        .map(|v| (key, serde_json::to_value(v).expect("flag values serialize")))
}
