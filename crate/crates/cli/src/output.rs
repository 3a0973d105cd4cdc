//! Staged outputs. Nothing touches the output directory until a command has
//! produced all of its files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "calpit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            config_hash: config.hash(),
            seed: config.seed,
        }
    }

    /// First line of every CSV output.
    pub fn csv_comment(&self) -> String {
        format!(
            "# {} {} config_hash={} seed={}\n",
            self.tool, self.version, self.config_hash, self.seed
        )
    }
}

pub struct Outputs {
    provenance: Provenance,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            files: Vec::new(),
        }
    }

    /// A CSV file whose body is produced by `write`.
    pub fn csv<E>(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> CliResult<()>
    where
        E: std::fmt::Display,
    {
        let mut bytes = self.provenance.csv_comment().into_bytes();
        write(&mut bytes).map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// A JSON object with a `provenance` member added.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut value = serde_json::to_value(value).map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        match &mut value {
            Value::Object(map) => {
                map.insert("provenance".into(), json!(self.provenance));
            }
            other => {
                value = json!({ "provenance": self.provenance, "data": other.take() });
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&value).map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// JSON lines; the first line is `{"provenance": ...}`.
    pub fn jsonl<E>(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> CliResult<()>
    where
        E: std::fmt::Display,
    {
        let mut bytes = serde_json::to_vec(&json!({ "provenance": self.provenance })).expect("provenance serializes");
        bytes.push(b'\n');
        write(&mut bytes).map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// Writes every file plus `manifest.json` listing their digests.
    pub fn commit(self, dir: &Path, command: &str, config: &RunConfig) -> CliResult<Vec<PathBuf>> {
        let io = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
        let mut written = Vec::new();
        let mut listing = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
            listing.push(json!({
                "path": name,
                "bytes": bytes.len(),
                "sha256": format!("{:x}", Sha256::digest(bytes)),
            }));
            written.push(path);
        }
        let manifest = json!({
            "provenance": self.provenance,
            "command": command,
            "config": config,
            "outputs": listing,
        });
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}
