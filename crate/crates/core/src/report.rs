//! Byte-stable JSON reports.
//!
//! Object keys are sorted, floats are printed with six decimals and integers
//! as-is, so equal inputs always give identical bytes.

use serde::Serialize;
use serde_json::Value;

use crate::corpus::{Container, FormatSpec};
use crate::keywords::KEYWORDS_VERSION;
use crate::metrics::ScaleMode;

/// Everything that influences a run's numbers; embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub l_max: usize,
    pub alpha: f64,
    pub c_mode: &'static str,
    /// Fixed `c`, or `None` when it is derived from the batch.
    pub c: Option<f64>,
    pub seed: u64,
    pub log_base: &'static str,
    pub keywords_version: u32,
    pub input_format: Option<Container>,
    pub sql_field: String,
    pub question_field: String,
    pub group_field: Option<String>,
    pub skip_bad_rows: bool,
    pub version: &'static str,
}

impl RunConfig {
    pub fn new(l_max: usize, alpha: f64, scale: ScaleMode, seed: u64, input: &FormatSpec) -> Self {
        let (c_mode, c) = match scale {
            ScaleMode::MaxInBatch => ("max_in_batch", None),
            ScaleMode::Fixed(c) => ("fixed", Some(c)),
        };
        Self {
            l_max,
            alpha,
            c_mode,
            c,
            seed,
            log_base: "e",
            keywords_version: KEYWORDS_VERSION,
            input_format: input.container,
            sql_field: input.sql_field.clone(),
            question_field: input.question_field.clone(),
            group_field: input.group_field.clone(),
            skip_bad_rows: input.skip_bad_rows,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Six-decimal rendering shared by JSON and CSV output.
pub fn fmt_float(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut out = String::new();
    write_value(&value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => {
            out.push_str(&serde_json::to_string(v).expect("scalar serializes"))
        }
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => out.push_str(&i.to_string()),
            (_, Some(u)) => out.push_str(&u.to_string()),
            _ => out.push_str(&fmt_float(n.as_f64().expect("finite number"))),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(depth + 1, out);
                write_value(item, depth + 1, out);
            }
            newline(depth, out);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (k, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(depth + 1, out);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_value(item, depth + 1, out);
            }
            newline(depth, out);
            out.push('}');
        }
    }
}

fn newline(depth: usize, out: &mut String) {
    out.push('\n');
    out.extend(std::iter::repeat_n("  ", depth));
}
