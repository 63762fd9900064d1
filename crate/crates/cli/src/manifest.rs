use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use rbpmc::config::Config;

/// Provenance record written next to every command's artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the effective configuration in TOML form.
    pub config_hash: String,
    pub config_file: Option<PathBuf>,
    pub overrides: BTreeMap<String, String>,
    pub config: Config,
    pub artifacts: Vec<PathBuf>,
    pub started: String,
    pub finished: String,
    pub complete: bool,
}

pub fn config_hash(config: &Config) -> String {
    hex::encode(Sha256::digest(config.to_toml_string().as_bytes()))
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &Config,
        config_file: Option<PathBuf>,
        overrides: BTreeMap<String, String>,
        started: DateTime<Utc>,
    ) -> Self {
        Self {
            command: command.to_string(),
            version: rbpmc_version(),
            seed: config.seed,
            config_hash: config_hash(config),
            config_file,
            overrides,
            config: config.clone(),
            artifacts: Vec::new(),
            started: stamp(started),
            finished: String::new(),
            complete: false,
        }
    }

    /// Stamps the end time and writes `manifest.json` via a temporary file and rename.
    pub fn finish(mut self, dir: &Path, complete: bool) -> anyhow::Result<PathBuf> {
        self.finished = stamp(Utc::now());
        self.complete = complete;
        self.artifacts.retain(|p| p.exists());
        let path = dir.join("manifest.json");
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&self)?)
            .with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(path)
    }
}

fn rbpmc_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}
