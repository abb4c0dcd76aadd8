use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rebalance::rng::fingerprint_bytes;
use rebalance::{Error, Result};
use serde::Serialize;

/// What a command read, how it was configured and what it wrote.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub toolkit_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Path → SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    /// Path → SHA-256 of every output file.
    pub outputs: BTreeMap<String, String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn fingerprint_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(fingerprint_bytes(&bytes))
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.into(),
            argv: std::env::args().collect(),
            toolkit_version: rebalance::VERSION.into(),
            seed: None,
            config: serde_json::Value::Null,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn config<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.config = serde_json::to_value(value).map_err(|e| Error::json("manifest config", e))?;
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), fingerprint_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), fingerprint_file(path)?);
        Ok(())
    }

    /// Writes `run-<command>.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix_ms = now_ms();
        let path = dir.join(format!("run-{}.json", self.command));
        let text =
            serde_json::to_string_pretty(&self).map_err(|e| Error::json("run manifest", e))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}
