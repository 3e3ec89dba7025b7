use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use crate::Format;

/// Destination for the machine-readable result of one command.
pub struct Output {
    path: Option<PathBuf>,
    format: Format,
    config: Value,
}

impl Output {
    /// Checks that the parent directory exists or can be created.
    pub fn prepare(path: Option<PathBuf>, format: Format, config: Value) -> Result<Self, String> {
        if let Some(p) = &path {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)
                    .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
            }
            if p.is_dir() {
                return Err(format!("output path {} is a directory", p.display()));
            }
        }
        Ok(Self { path, format, config })
    }

    /// Writes `csv` through the callback or the JSON envelope around `result`.
    pub fn emit(
        &self,
        result: impl FnOnce() -> Value,
        csv: impl FnOnce(&mut dyn Write) -> spectral_pi::Result<()>,
    ) -> spectral_pi::Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut w = BufWriter::new(File::create(path)?);
        match self.format {
            Format::Csv => csv(&mut w)?,
            Format::Json => {
                let envelope = json!({
                    "version": 1,
                    "config": self.config,
                    "result": result(),
                });
                serde_json::to_writer_pretty(&mut w, &envelope)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Single-result commands: JSON envelope, or the same value flattened
    /// into `key,value` rows.
    pub fn emit_record(&self, result: Value) -> spectral_pi::Result<()> {
        let flat = result.clone();
        self.emit(
            move || result,
            move |w| {
                let mut out = csv::Writer::from_writer(w);
                out.write_record(["key", "value"])?;
                for (k, v) in flatten(&flat) {
                    out.write_record([k, v])?;
                }
                out.flush()?;
                Ok(())
            },
        )
    }
}

/// Dotted-path leaves of a JSON value; `null` becomes `NaN`.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    walk(value, String::new(), &mut out);
    out
}

fn walk(value: &Value, prefix: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                walk(v, join(k), out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                walk(v, join(&i.to_string()), out);
            }
        }
        Value::Null => out.push((prefix, "NaN".into())),
        Value::String(s) => out.push((prefix, s.clone())),
        other => out.push((prefix, other.to_string())),
    }
}

/// JSON number, or `null` when not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn object(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(
        pairs
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect::<Map<_, _>>(),
    )
}

/// Six significant digits for human-readable summaries.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-5..=9).contains(&magnitude) {
        let decimals = (5 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig(0.461158792), "0.461159");
        assert_eq!(sig(42.6163), "42.6163");
        assert_eq!(sig(-0.585786437), "-0.585786");
        assert_eq!(sig(1234567.0), "1234567");
        assert_eq!(sig(3.2e-9), "3.20000e-9");
        assert_eq!(sig(0.0), "0");
    }

    #[test]
    fn flatten_paths() {
        let v = json!({"a": {"b": 1.5, "c": [1, null]}, "d": "x"});
        let flat = flatten(&v);
        assert_eq!(
            flat,
            vec![
                ("a.b".to_string(), "1.5".to_string()),
                ("a.c.0".to_string(), "1".to_string()),
                ("a.c.1".to_string(), "NaN".to_string()),
                ("d".to_string(), "x".to_string()),
            ]
        );
    }
}
