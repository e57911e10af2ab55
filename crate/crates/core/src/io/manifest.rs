//! Run manifest: content-hashed inventory of a simulation run, written
//! atomically (temp file + rename) as the commit marker.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRef {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureRef {
    pub path: String,
    pub sha256: String,
    pub position_index: usize,
    pub rx_beam: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub snr_db: f64,
    pub codebook: FileRef,
    pub scene: FileRef,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub positions: Vec<usize>,
    pub rx_beams: Vec<usize>,
    pub captures: Vec<CaptureRef>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_of_file(path: &FsPath) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl Manifest {
    /// Serialize and atomically replace `dir/manifest.json`.
    pub fn save(&self, dir: &FsPath) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        let tmp = dir.join(format!("{MANIFEST_NAME}.tmp"));
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, dir.join(MANIFEST_NAME))?;
        Ok(())
    }

    pub fn load(dir: &FsPath) -> Result<Self> {
        let bytes = std::fs::read(dir.join(MANIFEST_NAME))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}
