use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory.
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one command invocation, written as `manifest_<command>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
    pub crate_version: String,
    pub config_version: u32,
}

impl RunManifest {
    /// Hash every listed file under `dir`; fails if one is missing or empty.
    pub fn build(
        command: &str,
        config_hash: String,
        seed: u64,
        dir: &Path,
        files: &[PathBuf],
        wall_clock_seconds: f64,
    ) -> Result<Self> {
        let files = files
            .iter()
            .map(|rel| {
                let full = dir.join(rel);
                let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
                if bytes.is_empty() {
                    return Err(Error::Config(format!("artifact {} is empty", full.display())));
                }
                Ok(FileEntry {
                    path: rel.clone(),
                    bytes: bytes.len() as u64,
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RunManifest {
            command: command.to_string(),
            config_hash,
            seed,
            files,
            wall_clock_seconds,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_version: super::CONFIG_VERSION,
        })
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest_{}.json", command.replace('-', "_"))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(Self::file_name(&self.command));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
