//! Report serialization: JSON with every float written to 17 significant
//! digits, and plain CSV.

use serde::Serialize;
use serde_json::Value;
use std::fmt::Write;

pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("reports serialize to JSON");
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64().filter(|_| !n.is_f64()) {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64().filter(|_| !n.is_f64()) {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            if a.iter().all(|x| x.is_number()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, indent, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// A CSV table built row by row.
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        Csv { out: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[f64]) {
        let r: Vec<String> = cells.iter().map(|&x| float(x)).collect();
        self.out.push_str(&r.join(","));
        self.out.push('\n');
    }

    /// A row whose leading cells are integers (indices, labels).
    pub fn row_indexed(&mut self, ids: &[usize], cells: &[f64]) {
        let mut r: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
        r.extend(cells.iter().map(|&x| float(x)));
        self.out.push_str(&r.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_at_17_digits() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn json_keeps_integers_and_formats_floats() {
        #[derive(Serialize)]
        struct S {
            n: usize,
            x: f64,
            v: Vec<f64>,
        }
        let s = to_json(&S { n: 3, x: 0.5, v: vec![1.0, 2.0] });
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"x\": 5.0000000000000000e-1"));
        assert!(s.contains("[1.0000000000000000e0, 2.0000000000000000e0]"));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"], 0.5);
    }
}
