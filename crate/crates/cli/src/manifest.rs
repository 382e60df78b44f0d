//! Run manifests: one `manifest.json` per output directory recording what
//! produced every file in it.

use std::path::{Path, PathBuf};

use morse::moea::EvoParams;
use morse::risk::FitnessMode;
use morse::store::{read_json, write_atomic};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Incomplete,
    Complete,
}

/// A file inside the output directory (or an input elsewhere) and the
/// SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRef {
    /// Where the configuration came from: a file path or `preset:<id>`.
    pub source: String,
    /// Copy stored in the output directory; `sha256` is of these bytes.
    pub stored: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub command: String,
    pub seed: u64,
    pub code_version: String,
    pub configs: Vec<ConfigRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evo_params: Option<EvoParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness_mode: Option<FitnessMode>,
    /// Files read by the run, e.g. the archive for `evaluate`.
    #[serde(default)]
    pub inputs: Vec<FileRef>,
    /// Command-specific settings.
    #[serde(default)]
    pub parameters: serde_json::Value,
    pub started_at: String,
    #[serde(default)]
    pub finished_at: Option<String>,
    pub status: RunStatus,
    #[serde(default)]
    pub outputs: Vec<FileRef>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            run_id: uuid::Uuid::new_v4().to_string(),
            command: command.to_string(),
            seed,
            code_version: morse::VERSION.to_string(),
            configs: Vec::new(),
            evo_params: None,
            fitness_mode: None,
            inputs: Vec::new(),
            parameters: serde_json::Value::Null,
            started_at: now(),
            finished_at: None,
            status: RunStatus::Incomplete,
            outputs: Vec::new(),
        }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let m: Self = read_json(&Self::path(dir))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CliError::Store(morse::StoreError::SchemaVersion {
                what: "manifest",
                found: m.schema_version,
                expected: MANIFEST_SCHEMA_VERSION,
            }));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&Self::path(dir), text.as_bytes())?;
        Ok(())
    }

    /// Records an input file and its hash.
    pub fn add_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = read_bytes(path)?;
        self.inputs.push(FileRef {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    /// Writes `bytes` to `dir/name` and records the configuration.
    pub fn store_config(&mut self, dir: &Path, source: String, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&dir.join(name), bytes)?;
        self.configs.push(ConfigRef {
            source,
            stored: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Hashes the named outputs and marks the run complete.
    pub fn complete(&mut self, dir: &Path, outputs: &[String]) -> Result<(), CliError> {
        self.outputs = outputs
            .iter()
            .map(|name| {
                Ok(FileRef {
                    path: name.clone(),
                    sha256: sha256_hex(&read_bytes(&dir.join(name))?),
                })
            })
            .collect::<Result<_, CliError>>()?;
        self.status = RunStatus::Complete;
        self.finished_at = Some(now());
        self.save(dir)
    }

    /// Checks stored configurations and recorded outputs against their hashes.
    pub fn verify(&self, dir: &Path) -> Result<(), CliError> {
        let stored = self.configs.iter().map(|c| (&c.stored, &c.sha256));
        let outputs = self.outputs.iter().map(|o| (&o.path, &o.sha256));
        for (name, hash) in stored.chain(outputs) {
            let actual = sha256_hex(&read_bytes(&dir.join(name))?);
            if &actual != hash {
                return Err(CliError::HashMismatch(dir.join(name)));
            }
        }
        Ok(())
    }
}

/// What an output directory already holds.
pub enum Existing {
    Empty,
    Incomplete(RunManifest),
    Complete(RunManifest),
}

pub fn inspect(dir: &Path) -> Result<Existing, CliError> {
    if !RunManifest::path(dir).exists() {
        return Ok(Existing::Empty);
    }
    let m = RunManifest::load(dir)?;
    Ok(match m.status {
        RunStatus::Complete => Existing::Complete(m),
        RunStatus::Incomplete => Existing::Incomplete(m),
    })
}

/// Refuses to start a fresh run over an existing one.
pub fn require_fresh(dir: &Path) -> Result<(), CliError> {
    match inspect(dir)? {
        Existing::Empty => Ok(()),
        Existing::Complete(_) => Err(CliError::AlreadyComplete(dir.to_path_buf())),
        Existing::Incomplete(_) => Err(CliError::Incomplete(dir.to_path_buf())),
    }
}
