//! Output artifacts: CSV with a commented provenance header, and JSON with a
//! `meta` object. Both carry the tool version, the resolved configuration, the
//! seeds and the wall-clock duration.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "torus-lqg";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHeader {
    pub config: Vec<(String, String)>,
    pub seeds: Vec<u64>,
    pub duration: Duration,
}

impl RunHeader {
    pub fn new(config: Vec<(String, String)>, seeds: Vec<u64>) -> Self {
        Self { config, seeds, duration: Duration::ZERO }
    }

    pub fn finished(mut self, duration: Duration) -> Self {
        self.duration = duration;
        self
    }

    /// Everything but the duration.
    pub fn provenance(&self) -> Value {
        let cfg: Map<String, Value> = self.config.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        json!({ "tool": TOOL, "version": VERSION, "config": cfg, "seeds": self.seeds })
    }

    fn meta(&self) -> Value {
        let mut v = self.provenance();
        v["duration_s"] = json!(self.duration.as_secs_f64());
        v
    }
}

/// Shortest round-trip text, switching to exponent form for very large or small magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename, so
/// a failed run never leaves a partial artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = PathBuf::from(path);
    tmp.set_extension(format!("tmp{}", std::process::id()));
    let result = std::fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    if let Err(e) = result.and_then(|_| std::fs::rename(&tmp, path)) {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

/// CSV text: two `# ` header lines (provenance JSON, then duration), a column
/// header row and the data rows.
pub fn csv_bytes(header: &RunHeader, columns: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# {}", header.provenance()).expect("write to Vec");
    writeln!(out, "# duration_s: {}", header.duration.as_secs_f64()).expect("write to Vec");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for r in rows {
        if r.len() != columns.len() {
            return Err(CliError::SchemaMismatch(format!("row has {} fields, expected {}", r.len(), columns.len())));
        }
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Format(e.to_string()))
}

pub fn write_csv(path: &Path, header: &RunHeader, columns: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    write_atomic(path, &csv_bytes(header, columns, rows)?)
}

/// `body` (an object) with a `meta` entry added.
pub fn json_document(header: &RunHeader, body: Value) -> Value {
    let mut obj = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    obj.insert("meta".into(), header.meta());
    Value::Object(obj)
}

/// Pretty JSON to `out`, or to stdout.
pub fn emit_json(out: Option<&Path>, header: &RunHeader, body: Value) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(&json_document(header, body))?;
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(text)
}

/// Output text with its wall-clock duration removed; everything else must
/// match bit for bit between identical runs.
pub fn without_duration(text: &str) -> String {
    if let Ok(mut v) = serde_json::from_str::<Value>(text) {
        if let Some(meta) = v.get_mut("meta").and_then(Value::as_object_mut) {
            meta.remove("duration_s");
        }
        return v.to_string();
    }
    text.lines().filter(|l| !l.starts_with("# duration_s:")).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_duration_stripping() {
        let h = RunHeader::new(vec![("tau".into(), "0,1".into())], vec![7]).finished(Duration::from_millis(1500));
        let bytes = csv_bytes(&h, &["a", "b"], &[vec!["1".into(), fmt_f64(2.5e-7)]]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("# {\"config\":{\"tau\":\"0,1\"}"));
        assert!(text.contains("\"seeds\":[7]"));
        assert!(text.contains("# duration_s: 1.5"));
        assert!(text.ends_with("a,b\n1,2.5e-7\n"));
        let h2 = RunHeader { duration: Duration::from_secs(3), ..h.clone() };
        let other = String::from_utf8(csv_bytes(&h2, &["a", "b"], &[vec!["1".into(), fmt_f64(2.5e-7)]]).unwrap()).unwrap();
        assert_ne!(text, other);
        assert_eq!(without_duration(&text), without_duration(&other));
        assert!(csv_bytes(&h, &["a"], &[vec![]]).is_err());
    }

    #[test]
    fn json_meta_is_attached() {
        let h = RunHeader::new(vec![], vec![1, 2]);
        let doc = json_document(&h, json!({"green": 0.5}));
        assert_eq!(doc["green"], 0.5);
        assert_eq!(doc["meta"]["tool"], TOOL);
        assert_eq!(doc["meta"]["seeds"], json!([1, 2]));
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1e20), "1e20");
    }
}
