//! On-disk formats: the Pareto archive and evolution checkpoints.
//!
//! Both are JSON with a `schema_version`. Floats round-trip exactly and no
//! field depends on wall-clock time, so the same run always produces the same
//! bytes.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::{Network, NetworkConfig, OBJECTIVE_NAMES};
use crate::error::StoreError;
use crate::moea::{EvoParams, EvolveState, TrainingSetup};
use crate::policy::{Architecture, Genome};
use crate::risk::{FitnessMode, RiskEstimate};

pub const ARCHIVE_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedPolicy {
    pub id: usize,
    pub fitness: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskEstimate>,
    pub params: Vec<f64>,
}

/// Final non-dominated policies of a training run plus what produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub schema_version: u32,
    pub code_version: String,
    pub objectives: Vec<String>,
    pub seed: u64,
    pub fitness_mode: FitnessMode,
    pub evo_params: EvoParams,
    pub generations_run: usize,
    pub reference_point: Vec<f64>,
    pub config: NetworkConfig,
    pub architecture: Architecture,
    pub policies: Vec<ArchivedPolicy>,
}

impl ParetoArchive {
    /// Archive of the first front of `state`. Members with bit-identical
    /// fitness vectors are kept once.
    pub fn from_state(setup: &TrainingSetup, seed: u64, state: &EvolveState) -> Self {
        let mut policies: Vec<ArchivedPolicy> = Vec::new();
        for m in state.population.front() {
            let dup = policies
                .iter()
                .any(|p| p.fitness.iter().zip(&m.fitness).all(|(a, b)| a.to_bits() == b.to_bits()));
            if dup {
                continue;
            }
            policies.push(ArchivedPolicy {
                id: policies.len(),
                fitness: m.fitness.clone(),
                risk: m.risk.clone(),
                params: m.genome.encode(),
            });
        }
        Self {
            schema_version: ARCHIVE_SCHEMA_VERSION,
            code_version: crate::VERSION.to_string(),
            objectives: OBJECTIVE_NAMES.iter().map(|s| s.to_string()).collect(),
            seed,
            fitness_mode: setup.mode,
            evo_params: setup.params.clone(),
            generations_run: state.population.generation,
            reference_point: state.reference_point.clone(),
            config: setup.config.clone(),
            architecture: state
                .population
                .members
                .first()
                .map(|m| m.genome.architecture().clone())
                .unwrap_or_else(|| Architecture::new(0, vec![], 0, 0)),
            policies,
        }
    }

    /// Archive assembled from given genomes and fitness vectors (no training
    /// provenance). Ids follow input order.
    pub fn from_members(config: NetworkConfig, members: Vec<(Genome, Vec<f64>)>) -> Result<Self, StoreError> {
        let net = Network::new(config.clone()).map_err(|e| StoreError::Invalid(e.to_string()))?;
        let architecture = members
            .first()
            .map(|(g, _)| g.architecture().clone())
            .ok_or_else(|| StoreError::Invalid("archive needs at least one policy".into()))?;
        architecture.check_network(&net)?;
        let mut policies = Vec::with_capacity(members.len());
        for (id, (g, fitness)) in members.into_iter().enumerate() {
            if g.architecture() != &architecture {
                return Err(StoreError::Invalid(format!("policy {id} has a different architecture")));
            }
            policies.push(ArchivedPolicy { id, fitness, risk: None, params: g.encode() });
        }
        Ok(Self {
            schema_version: ARCHIVE_SCHEMA_VERSION,
            code_version: crate::VERSION.to_string(),
            objectives: OBJECTIVE_NAMES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            fitness_mode: FitnessMode::Mean,
            evo_params: EvoParams { hidden: architecture.hidden.clone(), ..EvoParams::default() },
            generations_run: 0,
            reference_point: Vec::new(),
            config,
            architecture,
            policies,
        })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn policy(&self, id: usize) -> Option<&ArchivedPolicy> {
        self.policies.iter().find(|p| p.id == id)
    }

    pub fn genome(&self, id: usize) -> Result<Genome, StoreError> {
        let p = self
            .policy(id)
            .ok_or_else(|| StoreError::Invalid(format!("archive has no policy {id}")))?;
        Ok(Genome::decode(&self.architecture, p.params.clone())?)
    }

    /// Policy ids and fitness vectors in archive order.
    pub fn fitness_table(&self) -> Vec<(usize, &[f64])> {
        self.policies.iter().map(|p| (p.id, p.fitness.as_slice())).collect()
    }

    /// True when the policies carry tail statistics.
    pub fn has_risk(&self) -> bool {
        matches!(self.fitness_mode, FitnessMode::Cvar { .. })
    }

    pub fn network(&self) -> Result<Network, StoreError> {
        Network::new(self.config.clone()).map_err(|e| StoreError::Invalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("archive serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let a: Self = parse_json(text, "<archive>")?;
        a.check()?;
        Ok(a)
    }

    fn check(&self) -> Result<(), StoreError> {
        if self.schema_version != ARCHIVE_SCHEMA_VERSION {
            return Err(StoreError::SchemaVersion {
                what: "archive",
                found: self.schema_version,
                expected: ARCHIVE_SCHEMA_VERSION,
            });
        }
        let n = self.architecture.n_params();
        for p in &self.policies {
            if p.params.len() != n {
                return Err(StoreError::Invalid(format!(
                    "policy {} has {} parameters, architecture needs {n}",
                    p.id,
                    p.params.len()
                )));
            }
            if p.fitness.len() != self.objectives.len() {
                return Err(StoreError::Invalid(format!("policy {} fitness has wrong length", p.id)));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let a: Self = read_json(path)?;
        a.check()?;
        Ok(a)
    }
}

/// Resumable evolution state written after every generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub seed: u64,
    pub fitness_mode: FitnessMode,
    pub evo_params: EvoParams,
    pub state: EvolveState,
}

impl Checkpoint {
    pub fn new(seed: u64, mode: FitnessMode, params: &EvoParams, state: &EvolveState) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            seed,
            fitness_mode: mode,
            evo_params: params.clone(),
            state: state.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let c: Self = read_json(path)?;
        if c.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(StoreError::SchemaVersion {
                what: "checkpoint",
                found: c.schema_version,
                expected: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        Ok(c)
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &str) -> Result<T, StoreError> {
    serde_json::from_str(text).map_err(|source| StoreError::Json {
        path: path.to_string(),
        source,
    })
}

/// Reads and parses a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
