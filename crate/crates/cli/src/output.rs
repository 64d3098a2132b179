//! Output files: CSV with a `#` metadata header, and JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Metadata {
    pub fn new(command: &str, config_bytes: &[u8], seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: hex,
            seed,
        }
    }

    fn header(&self) -> String {
        format!(
            "# {} {}\n# command: {}\n# config_sha256: {}\n# seed: {}\n",
            self.tool, self.version, self.command, self.config_sha256, self.seed
        )
    }
}

pub struct OutputDir {
    root: PathBuf,
    prefix: String,
    pub meta: Metadata,
}

impl OutputDir {
    pub fn create(root: &Path, prefix: &str, meta: Metadata) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.display().to_string(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            prefix: prefix.to_string(),
            meta,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(format!("{}{name}", self.prefix))
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }

    /// Writes `header` and `rows` (already comma-joined) below the metadata block.
    pub fn csv(&self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<PathBuf, CliError> {
        let mut body = self.meta.header();
        body.push_str(header);
        body.push('\n');
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        self.write(name, &body)
    }

    /// Writes `{"metadata": ..., "summary": ...}`.
    pub fn json(&self, name: &str, summary: &impl Serialize) -> Result<PathBuf, CliError> {
        let doc = serde_json::json!({ "metadata": self.meta, "summary": summary });
        let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

/// Shortest round-trip formatting, `NaN`/`inf` spelled out, empty for `None`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
