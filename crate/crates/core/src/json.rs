//! Canonical JSON: object keys sorted, compact, no trailing newline.

use serde::Serialize;
use serde_json::{Map, Value};

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, sort_keys(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn to_canonical_value<T: Serialize>(value: &T) -> serde_json::Result<Value> {
    serde_json::to_value(value).map(sort_keys)
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    to_canonical_value(value).and_then(|v| serde_json::to_string(&v))
}
