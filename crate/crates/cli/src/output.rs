use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    artifacts: Vec<ManifestEntry>,
}

/// Output root; every artifact written through it is listed in the manifest.
pub struct OutDir {
    root: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    /// Registers a file some other writer put under the root.
    pub fn record(&mut self, path: PathBuf) {
        self.artifacts.push(path);
    }

    /// Writes `manifest.json` with a SHA-256 per artifact, sorted by path.
    pub fn finish(mut self, command: &str) -> Result<PathBuf> {
        self.artifacts.sort();
        self.artifacts.dedup();
        let mut entries = Vec::with_capacity(self.artifacts.len());
        for path in &self.artifacts {
            let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
            let rel = path.strip_prefix(&self.root).unwrap_or(path);
            entries.push(ManifestEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            });
        }
        let manifest = Manifest {
            command,
            artifacts: entries,
        };
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::File {
        path: path.to_path_buf(),
        source: e.into(),
    }
}
