//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trustgame_core::{AgentSpec, PlannerConfig, Role};

use crate::io::{IoError, IoResult};

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pairing {
    pub investor: AgentSpec,
    pub trustee: AgentSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OutputPaths {
    /// Directory receiving records, CSVs and the manifest.
    pub dir: PathBuf,
}

/// A batch experiment: every pairing is played `repetitions` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub pairings: Vec<Pairing>,
    pub repetitions: usize,
    pub planner: PlannerConfig,
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != EXPERIMENT_SCHEMA_VERSION {
            return Err(format!(
                "schema version {} (expected {EXPERIMENT_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.pairings.is_empty() {
            return Err("no pairings".into());
        }
        if self.repetitions == 0 {
            return Err("repetitions must be at least 1".into());
        }
        for (i, p) in self.pairings.iter().enumerate() {
            if p.investor.role != Role::Investor || p.trustee.role != Role::Trustee {
                return Err(format!("pairing {i}: roles must be investor then trustee"));
            }
            p.investor.validate().map_err(|e| format!("pairing {i}: {e}"))?;
            p.trustee.validate().map_err(|e| format!("pairing {i}: {e}"))?;
        }
        self.planner.validate().map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> IoResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(path, &text)
    }

    pub fn from_str(path: &Path, text: &str) -> IoResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let found = value.get("schemaVersion").and_then(|v| v.as_u64());
        if found != Some(EXPERIMENT_SCHEMA_VERSION as u64) {
            return Err(IoError::SchemaMismatch {
                path: path.to_path_buf(),
                kind: "experiment config",
                found: found.map(|v| v.to_string()).unwrap_or_else(|| "(missing)".into()),
                expected: EXPERIMENT_SCHEMA_VERSION,
                hint: "see the experiment layout in docs/schema.md".into(),
            });
        }
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| IoError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn pairs(&self) -> Vec<(AgentSpec, AgentSpec)> {
        self.pairings.iter().map(|p| (p.investor, p.trustee)).collect()
    }
}
