use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_versioned, write_json, SCHEMA_VERSION};
use crate::error::{Error, Result};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    std::fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-execute a run and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub command: String,
    /// Command arguments in their parsed form, sufficient for a rerun.
    pub arguments: serde_json::Value,
    /// SHA-256 of the configuration bytes.
    pub config_digest: String,
    /// The configuration itself, so reruns do not depend on the original file.
    pub config: serde_json::Value,
    /// SHA-256 of each input data file, keyed by its role.
    pub data_digests: BTreeMap<String, String>,
    pub seed: u64,
    pub engine_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, arguments: serde_json::Value, config_bytes: &[u8], config: serde_json::Value, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            arguments,
            config_digest: sha256_hex(config_bytes),
            config,
            data_digests: BTreeMap::new(),
            seed,
            engine_version: ENGINE_VERSION.into(),
            started_at: now(),
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    /// Records a data input by role.
    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.data_digests.insert(role.into(), sha256_file(path)?);
        Ok(())
    }

    /// Records the digest of every named file under `out_dir` and stamps the
    /// finish time.
    pub fn finish(&mut self, out_dir: &Path, files: &[&str]) -> Result<()> {
        self.outputs = files
            .iter()
            .map(|f| {
                Ok(OutputFile {
                    path: f.to_string(),
                    sha256: sha256_file(&out_dir.join(f))?,
                })
            })
            .collect::<Result<_>>()?;
        self.finished_at = now();
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_versioned(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Output files under `dir` whose digests differ from the recorded ones.
    pub fn mismatched_outputs(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            let p = dir.join(&o.path);
            if !p.exists() || sha256_file(&p)? != o.sha256 {
                bad.push(o.path.clone());
            }
        }
        Ok(bad)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
