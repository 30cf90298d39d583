//! Byte-stable report rendering: sorted keys, floats at 12 significant digits.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to 12 significant digits and prints the shortest form that reads back.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("valid float");
    if rounded == 0.0 {
        return "0.0".into();
    }
    let s = if rounded.abs() < 1e-6 || rounded.abs() >= 1e16 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    };
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))
}

/// Pretty JSON with two-space indent. Object keys come out sorted because
/// `serde_json::Map` is ordered.
pub fn render_json(v: &Value) -> String {
    let mut out = String::new();
    write_json(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_json(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => {
                let _ = write!(out, "{u}");
            }
            (None, Some(i)) => {
                let _ = write!(out, "{i}");
            }
            _ => out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                out.push_str(&pad(indent + 1));
                write_json(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_json(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// One `path: value` line per leaf, same order and number format as the JSON.
pub fn render_text(v: &Value) -> String {
    let mut out = String::new();
    write_text(&mut out, "", v);
    out
}

fn write_text(out: &mut String, path: &str, v: &Value) {
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                write_text(out, &p, item);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let parts: Vec<String> = items.iter().map(leaf).collect();
            let _ = writeln!(out, "{path}: [{}]", parts.join(", "));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                write_text(out, &format!("{path}[{i}]"), item);
            }
        }
        _ => {
            let _ = writeln!(out, "{path}: {}", leaf(v));
        }
    }
}

fn leaf(v: &Value) -> String {
    let mut s = String::new();
    write_json(&mut s, v, 0);
    s
}
