//! Serialized output: every file goes through [`Collector`], which records it
//! for the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub kind: &'static str,
    pub config_sha256: String,
    pub master_seed: u64,
    pub workers: usize,
    /// `ok`, `budget-exceeded` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Collector {
    dir: PathBuf,
    files: Vec<FileRecord>,
    stages: Vec<StageTiming>,
    stage_start: Option<(String, Instant)>,
}

impl Collector {
    /// The directory is created on first write.
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            stages: Vec::new(),
            stage_start: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    fn ensure_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(self.dir.display(), e))
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        self.ensure_dir()?;
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Closes the running stage (if any) and opens `name`.
    pub fn stage(&mut self, name: &str) {
        self.end_stage();
        self.stage_start = Some((name.to_string(), Instant::now()));
    }

    fn end_stage(&mut self) {
        if let Some((stage, t)) = self.stage_start.take() {
            self.stages.push(StageTiming {
                stage,
                seconds: t.elapsed().as_secs_f64(),
            });
        }
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
        self.end_stage();
        manifest.stages = std::mem::take(&mut self.stages);
        manifest.files = std::mem::take(&mut self.files);
        self.ensure_dir()?;
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, json + "\n").map_err(|e| CliError::io(path.display(), e))?;
        Ok(manifest)
    }
}
