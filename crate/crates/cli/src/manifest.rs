use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ctxrank::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Exit;

/// An input file and the SHA-256 of its content at run time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }

    /// Fails with the compatibility exit code if the file changed.
    pub fn verify(&self) -> Result<()> {
        let now = sha256_file(&self.path)?;
        if now != self.sha256 {
            return Err(Exit::compatibility(format!(
                "{} changed since the manifest was written (sha256 {now}, recorded {})",
                self.path.display(),
                self.sha256
            ))
            .into());
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub metrics_csv: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub divergence: Option<String>,
}

/// Everything needed to rerun `ctxrank train` and check that the inputs are
/// the same: the fully resolved configuration, input hashes, seeds and
/// artifact locations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: TrainConfig,
    pub corpus: FileRecord,
    pub dev: FileRecord,
    pub doc_encoder: Option<FileRecord>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    pub aggregate_csv: Option<PathBuf>,
    pub started_unix_secs: u64,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| {
            ctxrank::Error::Parse { location: path.display().to_string(), message: e.to_string() }.into()
        })
    }
}
