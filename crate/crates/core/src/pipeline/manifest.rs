//! What a pipeline run produced, with content hashes so a later run can
//! tell which stages are still up to date.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use super::io;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seed: u64,
    pub outputs: Vec<FileRecord>,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub crate_version: String,
    pub feature_version: String,
    pub model_format: String,
    pub stages: Vec<StageRecord>,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn file_record(root: &Path, path: &Path) -> Result<FileRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let rel = path.strip_prefix(root).unwrap_or(path).to_path_buf();
    Ok(FileRecord { path: rel, sha256: hex(&Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}

impl RunManifest {
    pub fn load(dir: &Path) -> Option<Self> {
        io::read_json(&dir.join(MANIFEST_FILE)).ok()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Every file of `name` is present with the recorded content.
    pub fn stage_intact(&self, root: &Path, name: &str) -> bool {
        let Some(s) = self.stage(name) else { return false };
        s.outputs.iter().all(|f| {
            let p = root.join(&f.path);
            file_record(root, &p).is_ok_and(|r| r.sha256 == f.sha256)
        })
    }

    pub fn files(&self) -> impl Iterator<Item = &FileRecord> {
        self.stages.iter().flat_map(|s| &s.outputs)
    }
}
