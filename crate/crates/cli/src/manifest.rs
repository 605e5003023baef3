//! Run manifests. The hash covers everything that determines the results
//! (command, resolved arguments, seed, configuration, code version) and
//! nothing else, so thread counts, output paths and timestamps never change
//! it.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::Result;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub hash: String,
    pub command: String,
    pub arguments: serde_json::Value,
    pub seed: u64,
    pub config: Config,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    arguments: &'a serde_json::Value,
    seed: u64,
    config: &'a Config,
    code_version: &'a str,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, arguments: serde_json::Value, seed: u64, config: &Config) -> Self {
        let hashed = Hashed { command, arguments: &arguments, seed, config, code_version: CODE_VERSION };
        let bytes = serde_json::to_vec(&hashed).expect("manifest fields serialize");
        Self {
            hash: sha256_hex(&bytes),
            command: command.to_string(),
            arguments,
            seed,
            config: config.clone(),
            code_version: CODE_VERSION.to_string(),
            started_unix: now_unix(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    /// Stamps the end time and writes `manifest.json` into `dir`.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = now_unix();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| crate::CliError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
