//! Deterministic file emission: CSV and JSON writers plus the run manifest
//! with per-file checksums.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct EmitError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

/// Shortest round-trip decimal rendering; identical across reruns.
pub fn fmt(v: f64) -> String {
    if v == 0.0 {
        // Collapse -0 so arithmetically equal pipelines emit equal bytes.
        "0".into()
    } else {
        format!("{v}")
    }
}

pub struct OutDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, EmitError> {
        fs::create_dir_all(root).map_err(|source| EmitError {
            path: root.display().to_string(),
            source,
        })?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, data: &[u8]) -> Result<(), EmitError> {
        let path = self.root.join(name);
        fs::write(&path, data).map_err(|source| EmitError {
            path: path.display().to_string(),
            source,
        })?;
        let digest = Sha256::digest(data);
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: data.len(),
            sha256: format!("{digest:x}"),
        });
        Ok(())
    }

    /// CSV with a header row and '.' decimal separators.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), EmitError> {
        let mut buf = Vec::new();
        writeln!(buf, "{}", header.join(",")).unwrap();
        for row in rows {
            writeln!(buf, "{}", row.join(",")).unwrap();
        }
        self.write_bytes(name, &buf)
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), EmitError> {
        let mut buf = serde_json::to_vec_pretty(value).expect("serializable");
        buf.push(b'\n');
        self.write_bytes(name, &buf)
    }

    /// Write the manifest last so it lists every other emitted file.
    pub fn write_manifest(
        &mut self,
        command: &str,
        config_echo: &serde_json::Value,
        stages: &[StageTime],
        ok: bool,
        messages: &[String],
    ) -> Result<(), EmitError> {
        let manifest = serde_json::json!({
            "schema_version": crate::config::SCHEMA_VERSION,
            "artifact_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config_echo,
            "stages": serde_json::to_value(stages).unwrap(),
            "files": serde_json::to_value(&self.files).unwrap(),
            "ok": ok,
            "messages": messages,
        });
        self.write_json("manifest.json", &manifest)
    }
}
