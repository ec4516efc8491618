use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version of the on-disk artifact layout.
pub const ARTIFACT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

/// Machine-readable record of one stage run. Holds no timestamps so reruns
/// with the same configuration produce identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    pub artifact_format: u32,
    pub artifacts: Vec<ArtifactDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

impl RunManifest {
    pub fn new(stage: &str, config_hash: &str, seed: u64, root: &Path, artifacts: &[PathBuf]) -> Result<Self> {
        let mut digests = artifacts
            .iter()
            .map(|p| Ok(ArtifactDigest { path: relative(root, p), sha256: sha256_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        digests.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(RunManifest {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            artifact_format: ARTIFACT_FORMAT,
            artifacts: digests,
        })
    }

    pub fn path(root: &Path, stage: &str) -> PathBuf {
        root.join(stage).join("manifest.json")
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let path = Self::path(root, &self.stage);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(root: &Path, stage: &str) -> Result<Self> {
        let path = Self::path(root, stage);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
