//! File writers. Every file records the tool version, config hash and seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Bumped whenever a CSV header or JSON layout changes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub format: u32,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            format: FORMAT_VERSION,
            config_hash,
            seed,
        }
    }

    pub fn comment(&self) -> String {
        format!(
            "# bns-emm {} format={} config_hash={} seed={}",
            self.version, self.format, self.config_hash, self.seed
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes a CSV file whose first line is the provenance comment.
pub fn write_csv(dir: &Path, name: &str, prov: &Provenance, header: &[String], rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let mut text = prov.comment();
    text.push('\n');
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Writes a CSV produced by `body` after the provenance comment.
pub fn write_csv_with(
    dir: &Path,
    name: &str,
    prov: &Provenance,
    body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    writeln!(buf, "{}", prov.comment()).map_err(io_err(&path))?;
    body(&mut buf).map_err(io_err(&path))?;
    fs::write(&path, buf).map_err(io_err(&path))?;
    Ok(path)
}

/// Writes `{"provenance": ..., key: body}` as pretty JSON.
pub fn write_json(dir: &Path, name: &str, prov: &Provenance, key: &str, body: impl Serialize) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let body = serde_json::to_value(body).map_err(|e| io_err(&path)(e.into()))?;
    let mut doc = json!({ "provenance": prov });
    doc.as_object_mut().expect("object").insert(key.to_string(), body);
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| io_err(&path)(e.into()))?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn value(x: f64) -> String {
    bns_emm::model::fmt_real(x)
}

pub fn json_real(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(value(x))
    }
}
