//! Per-run provenance record written next to the outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub library_version: String,
    /// SHA-256 of the resolved config rendered as TOML.
    pub config_sha256: String,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// The only field that differs between otherwise identical runs.
    pub created_unix_ms: u128,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<FileHash> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            library_version: candleforge::VERSION.to_string(),
            config_sha256: sha256_hex(config.to_toml().as_bytes()),
            config: config.clone(),
            inputs: inputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        })
    }

    /// Write `<dir>/manifest.json` and return its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
