//! Run manifests: what produced an artifact, and digests to check a replay
//! against.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    /// Seed of generated payloads (loopback without input, sweeps).
    pub waveform: Option<u64>,
    /// Master seed handed to the channel synthesizer.
    pub channel: Option<u64>,
    /// Per-element noise seeds drawn from the channel seed.
    pub noise: Vec<u64>,
}

impl Seeds {
    pub fn master(master: u64) -> Self {
        Seeds {
            master,
            waveform: None,
            channel: None,
            noise: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub seeds: Seeds,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<PathBuf>,
}

/// Manifest as written next to the outputs. Only `manifest` enters the
/// hash; output digests and the timestamp are recorded alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub manifest: RunManifest,
    pub manifest_hash: String,
    pub output_digests: Vec<Artifact>,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seeds: Seeds) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(Artifact {
            path: path.to_path_buf(),
            sha256: file_sha256(path)?,
        });
        Ok(())
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("manifest serializes")))
    }

    /// Digests every output and writes `<first output>.manifest.json`.
    pub fn write(&self) -> Result<ManifestRecord> {
        let output_digests = self
            .outputs
            .iter()
            .map(|p| {
                Ok(Artifact {
                    path: p.clone(),
                    sha256: file_sha256(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let record = ManifestRecord {
            manifest: self.clone(),
            manifest_hash: self.hash(),
            output_digests,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        if let Some(first) = self.outputs.first() {
            let path = manifest_path(first);
            let text = serde_json::to_string_pretty(&record).expect("manifest serializes");
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(record)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn bytes_sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
