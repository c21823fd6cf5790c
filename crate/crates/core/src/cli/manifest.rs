//! `manifest.json`: tool version, resolved configuration and content
//! digests of every input and output. No timestamps, so identical runs give
//! identical manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(role: &str, path: &Path) -> crate::Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(FileDigest {
        role: role.to_string(),
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string()),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, threads: usize) -> crate::Result<Self> {
        let canonical = serde_json::to_vec(&config)?;
        Ok(Manifest {
            tool: "disruptr",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_hex(&canonical),
            config,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn add_inputs(&mut self, inputs: &[(&str, PathBuf)]) -> crate::Result<()> {
        for (role, path) in inputs {
            self.inputs.push(digest_file(role, path)?);
        }
        Ok(())
    }

    /// Records outputs in file-name order.
    pub fn add_outputs(&mut self, outputs: &[PathBuf]) -> crate::Result<()> {
        let mut sorted = outputs.to_vec();
        sorted.sort();
        sorted.dedup();
        for path in &sorted {
            self.outputs.push(digest_file("output", path)?);
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> crate::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| crate::Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
