//! Merging of JSON config files with command-line flags.

use std::path::{Path, PathBuf};

use qsc_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn read_config(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidParam {
        field: "config".into(),
        reason: format!("{}: {e}", path.display()),
    })?;
    match serde_json::from_str(&text)? {
        Value::Object(map) => Ok(map),
        _ => Err(Error::InvalidParam {
            field: "config".into(),
            reason: "top level must be an object".into(),
        }),
    }
}

/// Writes every non-null entry of `flags` over `base`.
pub fn overlay(base: &mut Map<String, Value>, flags: Value) {
    if let Value::Object(flags) = flags {
        for (k, v) in flags {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| Error::InvalidParam {
                field: key.into(),
                reason: e.to_string(),
            }),
    }
}

/// Removes the shared keys from `map`; command-line values win.
pub fn split_common(map: &mut Map<String, Value>, cli: &Common) -> Result<Common> {
    let seed = take(map, "seed")?;
    let workers = take(map, "workers")?;
    let out = take(map, "out")?;
    Ok(Common {
        seed: cli.seed.or(seed),
        workers: cli.workers.or(workers),
        out: cli.out.clone().or(out),
    })
}

/// Deserialises command options; unknown keys are rejected by the target type.
pub fn parse<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "config".into());
        Error::InvalidParam { field, reason: msg }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_override_file() {
        let Value::Object(mut base) = json!({"m": [4], "eps": [0.1], "seed": 3}) else {
            unreachable!()
        };
        overlay(&mut base, json!({"m": [8], "eps": null}));
        let c = split_common(
            &mut base,
            &Common {
                seed: Some(9),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(base["m"], json!([8]));
        assert_eq!(base["eps"], json!([0.1]));
        assert!(!base.contains_key("seed"));
    }

    #[test]
    fn file_seed_used_without_flag() {
        let Value::Object(mut base) = json!({"seed": 3, "workers": 2}) else {
            unreachable!()
        };
        let c = split_common(&mut base, &Common::default()).unwrap();
        assert_eq!((c.seed, c.workers), (Some(3), Some(2)));
    }
}
