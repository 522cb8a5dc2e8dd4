//! Deterministic CSV emission and run manifests.
//!
//! All numeric CSV output uses 9 significant digits in scientific
//! notation, UTF-8 and `\n` newlines, so identical inputs yield
//! byte-identical files across platforms.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Format a float with 9 significant digits.
pub fn fmt_g9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Write a CSV file with the given header and rows of preformatted cells.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), OutputError> {
    let mut buf = String::new();
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Provenance record written alongside every output set.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub subcommand: String,
    pub input_path: String,
    pub input_sha256: String,
    /// Resolved configuration echo (parsed scene file as JSON).
    pub resolved_config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        input_path: &Path,
        input_bytes: &[u8],
        resolved_config: serde_json::Value,
    ) -> Self {
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            input_path: input_path.display().to_string(),
            input_sha256: sha256_hex(input_bytes),
            resolved_config,
            outputs: vec![],
        }
    }

    /// Write `manifest.json` into the output directory.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, OutputError> {
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}
