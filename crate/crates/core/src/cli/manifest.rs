use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{RaatError, Result};
use crate::hash::fnv1a64;

/// FNV-1a 64 digest of one file, as lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub fnv1a64: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| RaatError::io(path, e))?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
        })
    }
}

/// Record of one CLI run: what went in, what came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub exit_code: i32,
    pub duration_secs: f64,
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths.iter().filter(|p| p.is_file()).map(|p| FileDigest::of(p)).collect()
}

impl RunManifest {
    pub fn collect(
        subcommand: &str,
        config: serde_json::Value,
        seed: Option<u64>,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        exit_code: i32,
        duration_secs: f64,
    ) -> Result<Self> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: subcommand.to_owned(),
            config,
            seed,
            inputs: digests(inputs)?,
            outputs: digests(outputs)?,
            exit_code,
            duration_secs,
        })
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let body = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&tmp, body).map_err(|e| RaatError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| RaatError::io(path, e))
    }
}
