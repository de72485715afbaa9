//! CSV and JSON emitters. Numbers use the shortest representation that parses
//! back to the same `f64`, so identical inputs give byte-identical files.

use std::fmt::Write;

use ccqi_core::fringes::FringeProfile;
use serde_json::{Map, Value};

pub fn format_f64(v: f64) -> String {
    let magnitude = v.abs();
    if v == 0.0 {
        // Avoid "-0".
        "0".to_string()
    } else if (1e-5..1e16).contains(&magnitude) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn csv_row<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut line = fields
        .into_iter()
        .map(|f| f.as_ref().to_string())
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

pub fn float_row(values: &[f64]) -> String {
    csv_row(values.iter().map(|&v| format_f64(v)))
}

pub fn int_row(values: &[u64]) -> String {
    csv_row(values.iter().map(u64::to_string))
}

pub fn profile_csv(profile: &FringeProfile) -> String {
    let mut out = String::from("position,intensity\n");
    for (x, i) in profile.positions.iter().zip(&profile.intensity) {
        let _ = writeln!(out, "{},{}", format_f64(*x), format_f64(*i));
    }
    out
}

/// JSON number, or `null` when not finite.
pub fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Object keyed by category label.
pub fn labelled<T: Copy>(labels: &[&str], values: &[T], to_json: impl Fn(T) -> Value) -> Value {
    let map: Map<String, Value> = labels
        .iter()
        .zip(values)
        .map(|(l, v)| (l.to_string(), to_json(*v)))
        .collect();
    Value::Object(map)
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialise");
    s.push('\n');
    s
}
