//! Deterministic rendering of results: JSON with 17 significant digits and
//! CSV sharing the same number rendering.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::Value;

/// `%.17g`: 17 significant digits, trailing zeros trimmed, exponent form
/// outside `[1e-5, 1e17)`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

struct G17Formatter;

impl Formatter for G17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with the fixed float rendering and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, G17Formatter);
    value.serialize(&mut ser).expect("serializable");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8")
}

fn csv_field(v: &Value) -> String {
    let raw = match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => format_f64(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => to_json(other).trim_end().to_string(),
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

/// CSV with `#` comment lines carrying the config, a header from the keys
/// of the first row, then one line per row.
pub fn to_csv<C: Serialize, R: Serialize>(config: &C, rows: &[R]) -> String {
    let mut out = format!("# config: {}", to_json(config));
    let rows: Vec<Value> = rows.iter().map(|r| serde_json::to_value(r).expect("serializable")).collect();
    let Some(Value::Object(first)) = rows.first() else {
        return out;
    };
    let keys: Vec<String> = first.keys().cloned().collect();
    out.push_str(&keys.join(","));
    out.push('\n');
    for row in &rows {
        let fields: Vec<String> = keys.iter().map(|k| csv_field(row.get(k).unwrap_or(&Value::Null))).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
