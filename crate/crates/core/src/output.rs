//! Output files. Every file starts with the configuration hash: CSV and
//! two-column files as a `# config_hash: …` comment line, JSON documents as a
//! top-level `config_hash` field.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ConfigHash;
use crate::error::{Error, Result};

pub const OUTPUT_DIR_ENV: &str = "FRACBEC_OUTPUT_DIR";

/// Collects the files written by one command.
pub struct OutputDir {
    root: PathBuf,
    hash: ConfigHash,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, hash: ConfigHash) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            hash,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    /// Comma-separated table with a header row; values use the shortest
    /// representation that round-trips.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let mut text = format!("# config_hash: {}\n{}\n", self.hash, header.join(","));
        for row in rows {
            if row.len() != header.len() {
                return Err(Error::InvalidInput(format!(
                    "{name}: row of {} values under a header of {}",
                    row.len(),
                    header.len()
                )));
            }
            let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.put(name, &text)
    }

    /// Plain whitespace-separated `x y` pairs for plotting.
    pub fn two_column(&mut self, name: &str, labels: (&str, &str), xs: &[f64], ys: &[f64]) -> Result<PathBuf> {
        let mut text = format!("# config_hash: {}\n# {} {}\n", self.hash, labels.0, labels.1);
        for (x, y) in xs.iter().zip(ys) {
            let _ = writeln!(text, "{} {}", format_value(*x), format_value(*y));
        }
        self.put(name, &text)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<PathBuf> {
        let mut doc = serde_json::Map::new();
        doc.insert("config_hash".into(), Value::String(self.hash.to_string()));
        match serde_json::to_value(body)? {
            Value::Object(map) => doc.extend(map),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.put(name, &text)
    }

    /// `manifest.json`: hash, versions, wall time and the files written.
    pub fn manifest(&mut self, command: &str, wall_seconds: f64) -> Result<PathBuf> {
        let files = self.written.clone();
        let body = json!({
            "command": command,
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_seconds": wall_seconds,
            "files": files,
        });
        self.json("manifest.json", &body)
    }
}

/// Integral values print without exponent; non-finite values are written as
/// `nan`, `inf` or `-inf`.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

/// `--output` beats the environment variable, which beats the config.
pub fn resolve_output_dir(flag: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let hash = RunConfig::default().hash();
        let mut out = OutputDir::create(dir.path(), hash.clone()).unwrap();
        let path = out.csv("t.csv", &["x", "y"], &[vec![0.5, -2.0], vec![1e-20, f64::NAN]]).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text, format!("# config_hash: {hash}\nx,y\n5e-1,-2\n1e-20,nan\n"));
        assert!(out.csv("bad.csv", &["x"], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn json_carries_hash() {
        let dir = tempfile::tempdir().unwrap();
        let hash = RunConfig::default().hash();
        let mut out = OutputDir::create(dir.path(), hash.clone()).unwrap();
        let path = out.json("a.json", &json!({ "value": 1.5 })).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["config_hash"], hash.as_str());
        assert_eq!(v["value"], 1.5);
        out.manifest("test", 0.1).unwrap();
        assert_eq!(out.written(), ["a.json", "manifest.json"]);
    }

    #[test]
    fn value_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 1024.0, -3.0] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
    }
}
