use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use mars_core::trainer::{TrainConfig, CONFIG_FILE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    /// SHA-256 of the canonical JSON config snapshot.
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

pub fn config_hash(config: &TrainConfig) -> Result<String> {
    let canonical = config.to_canonical_json()?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

impl RunManifest {
    pub fn new(config_path: Option<&Path>, config: &TrainConfig, output_dir: &Path) -> Result<Self> {
        Ok(Self {
            config_path: config_path.map(Path::to_path_buf),
            config_hash: config_hash(config)?,
            output_dir: output_dir.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Loads the manifest of a run directory and checks it against the
    /// config snapshot stored next to it.
    pub fn load_checked(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("missing {}", path.display()))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))?;
        let cfg_path = dir.join(CONFIG_FILE);
        let cfg_text =
            fs::read_to_string(&cfg_path).with_context(|| format!("missing {}", cfg_path.display()))?;
        let config: TrainConfig = serde_json::from_str(&cfg_text)
            .with_context(|| format!("malformed {}", cfg_path.display()))?;
        let hash = config_hash(&config)?;
        if hash != manifest.config_hash {
            bail!(
                "{}: config hash {} does not match manifest {}",
                dir.display(),
                hash,
                manifest.config_hash
            );
        }
        Ok(manifest)
    }
}

/// Parses and validates a TOML run config. Unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: TrainConfig =
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    config
        .validate()
        .with_context(|| format!("invalid config {}", path.display()))?;
    Ok(config)
}
