//! Run reports and the float normalization shared by every JSON report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// Rounds `x` to 12 significant digits so reports compare stably across
/// platforms.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_floats),
        Value::Object(m) => m.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with 12-digit floats and a trailing newline.
pub fn report_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("serializable report");
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("serializable report");
    s.push('\n');
    s
}

/// Compact JSON line with 12-digit floats.
pub fn report_line<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("serializable report");
    round_floats(&mut v);
    serde_json::to_string(&v).expect("serializable report")
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Per-invocation summary. Elapsed time lives only here, never in
/// artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub status: &'static str,
    pub config_digest: String,
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: f64,
}

impl RunReport {
    pub fn new(command: &str, config_digest: String) -> Self {
        RunReport {
            command: command.to_string(),
            status: "ok",
            config_digest,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            warnings: Vec::new(),
            error: None,
            elapsed_ms: 0.0,
        }
    }

    pub fn input(&mut self, name: &str, path: &Path, bytes: &[u8]) {
        self.inputs.insert(
            name.to_string(),
            InputDigest {
                path: path.display().to_string(),
                sha256: codeplexity::digest::of_bytes(bytes),
            },
        );
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.to_string(), path.display().to_string());
    }

    pub fn count(&mut self, name: &str, value: impl Into<Value>) {
        self.counts.insert(name.to_string(), value.into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(-123456.7890123456), -123456.789012);
        assert_eq!(round12(0.0), 0.0);
        let mut v = serde_json::json!({"a": [1, 2.00000000000001], "b": {"c": 1e-20}});
        round_floats(&mut v);
        assert_eq!(v, serde_json::json!({"a": [1, 2.0], "b": {"c": 1e-20}}));
    }
}
