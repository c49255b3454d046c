//! Canonical record format.
//!
//! Every artifact the framework persists or embeds into a prompt is a JSON
//! object whose first two keys are `schema_version` and `kind`, followed by the
//! value's own fields in declaration order. Layout is fixed:
//!
//! - objects are printed one key per line with two-space indentation;
//! - arrays holding only scalars are printed inline (`[1, 2, 3]`);
//! - adjustment operations (objects whose first key is `op`) are printed on a
//!   single line, so a quoted operation is always a contiguous substring of the
//!   record that contains it.
//!
//! Equal values therefore always produce identical bytes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt::Write as _;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// A value with a canonical record representation.
pub trait Record: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn to_record(&self) -> String {
        to_record(self)
    }

    fn from_record(text: &str) -> Result<Self, ParseError> {
        from_record(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn from_json(err: &serde_json::Error) -> Self {
        Self {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    fn at_start(message: impl Into<String>) -> Self {
        Self {
            line: 1,
            column: 1,
            message: message.into(),
        }
    }
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

pub fn to_record<T: Record>(value: &T) -> String {
    let body = serde_json::to_value(value).expect("record types serialize to JSON");
    let mut map = Map::new();
    map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    map.insert("kind".into(), Value::from(T::KIND));
    match body {
        Value::Object(fields) => {
            for (k, v) in fields {
                map.insert(k, v);
            }
        }
        other => {
            map.insert("value".into(), other);
        }
    }
    let mut out = String::new();
    write_value(&mut out, &Value::Object(map), 0);
    out.push('\n');
    out
}

pub fn from_record<T: Record>(text: &str) -> Result<T, ParseError> {
    let header: Header = serde_json::from_str(text).map_err(|e| ParseError::from_json(&e))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(ParseError::at_start(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    if header.kind != T::KIND {
        return Err(ParseError::at_start(format!(
            "expected record kind `{}`, found `{}`",
            T::KIND,
            header.kind
        )));
    }
    serde_json::from_str(text).map_err(|e| ParseError::from_json(&e))
}

/// Canonical text of an arbitrary serializable value (no envelope).
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serializes to JSON");
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out
}

/// Single-line JSON text, used for adjustment operations.
pub fn compact_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("value serializes to JSON")
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn is_op(map: &Map<String, Value>) -> bool {
    map.keys().next().map(String::as_str) == Some("op")
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, v: &Value, level: usize) {
    match v {
        Value::Object(map) if is_op(map) => {
            out.push_str(&serde_json::to_string(v).expect("json"));
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            let last = map.len() - 1;
            for (i, (k, val)) in map.iter().enumerate() {
                indent(out, level + 1);
                let _ = write!(out, "{}: ", serde_json::to_string(k).expect("json"));
                write_value(out, val, level + 1);
                if i != last {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&serde_json::to_string(item).expect("json"));
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            let last = items.len() - 1;
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                if i != last {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        scalar => out.push_str(&serde_json::to_string(scalar).expect("json")),
    }
}
