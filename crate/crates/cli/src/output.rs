use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Writes a single object. CSV gets one header row of dotted keys and one
/// row of values.
pub fn emit_object<T: Serialize, W: Write>(out: W, value: &T, format: Format) -> Result<(), CliError> {
    match format {
        Format::Json => emit_json(out, value),
        Format::Csv => {
            let value = serde_json::to_value(value).map_err(CliError::internal)?;
            let mut flat = Vec::new();
            flatten("", &value, &mut flat);
            let mut w = csv::Writer::from_writer(out);
            w.write_record(flat.iter().map(|(k, _)| k.as_str()))
                .and_then(|_| w.write_record(flat.iter().map(|(_, v)| v.as_str())))
                .map_err(csv_err)?;
            w.flush().map_err(|e| CliError::io("stdout", e))
        }
    }
}

/// Writes a list of flat rows: a JSON array or a CSV table.
pub fn emit_rows<T: Serialize, W: Write>(out: W, rows: &[T], format: Format) -> Result<(), CliError> {
    match format {
        Format::Json => emit_json(out, &rows),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::io("stdout", e))
        }
    }
}

pub fn emit_json<T: Serialize, W: Write>(mut out: W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, value).map_err(CliError::internal)?;
    writeln!(out).map_err(|e| CliError::io("stdout", e))
}

fn csv_err(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => CliError::io("stdout", e),
        other => CliError::Internal(format!("{other:?}")),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_objects_flatten_to_dotted_keys() {
        let v = serde_json::json!({"a": {"b": 1, "c": [2, 3]}, "d": null, "e": "x"});
        let mut flat = Vec::new();
        flatten("", &v, &mut flat);
        let keys: Vec<&str> = flat.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["a.b", "a.c.0", "a.c.1", "d", "e"]);
        assert_eq!(flat[4].1, "x");
    }
}
