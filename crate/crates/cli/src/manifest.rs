//! Run manifests: the effective configuration, seeds, version and a SHA-256
//! of every CSV written, so a run can be replayed and checked byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest: ManifestHeader,
    pub config: ExperimentConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// The config as echoed into a manifest: the output directory is dropped so
/// the hash does not depend on where a run was written.
pub fn canonical_config(config: &ExperimentConfig) -> ExperimentConfig {
    let mut c = config.clone();
    c.output.dir = None;
    c
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, outputs: BTreeMap<String, String>) -> CliResult<Self> {
        let config = canonical_config(config);
        Ok(Self {
            manifest: ManifestHeader {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: config.run.seed,
                config_sha256: sha256_hex(config.to_toml()?.as_bytes()),
                outputs,
            },
            config,
        })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        let m: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        let hash = sha256_hex(m.config.to_toml()?.as_bytes());
        if hash != m.manifest.config_sha256 {
            return Err(CliError::Config(format!(
                "{}: config hash {hash} does not match recorded {}",
                path.display(),
                m.manifest.config_sha256
            )));
        }
        Ok(m)
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
