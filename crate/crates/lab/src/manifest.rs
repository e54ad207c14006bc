//! Run manifests.
//!
//! Every CLI run writes `manifest.json` next to its outputs. It holds the
//! arguments of the run, a digest of the resolved settings, the seed, tool
//! versions and a hash of every output file. Manifests carry no timestamps,
//! so a replay produces a byte-identical manifest as well.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trustgame_core::simulator::{planner_digest, RECORD_SCHEMA_VERSION};
use trustgame_core::PlannerConfig;

use crate::io::{file_sha256, sha256_hex, write_json, IoError, IoResult, FIT_SCHEMA_VERSION};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Versions {
    pub trustgame: String,
    pub trustgame_core: String,
    pub record_schema: u32,
    pub fit_schema: u32,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            trustgame: env!("CARGO_PKG_VERSION").to_string(),
            trustgame_core: trustgame_core::VERSION.to_string(),
            record_schema: RECORD_SCHEMA_VERSION,
            fit_schema: FIT_SCHEMA_VERSION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OutputFile {
    /// File name relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    /// False for files holding wall-clock measurements.
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// Resolved settings of the run.
    pub settings: serde_json::Value,
    /// SHA-256 of `settings` in compact form.
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_digest: Option<String>,
    pub versions: Versions,
    /// Input files and their hashes.
    pub inputs: Vec<OutputFile>,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>, settings: serde_json::Value, planner: Option<&PlannerConfig>) -> Self {
        let compact = serde_json::to_string(&settings).expect("json value serialises");
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            args,
            config_digest: sha256_hex(compact.as_bytes()),
            settings,
            seed: planner.map(|p| p.seed),
            planner_digest: planner.map(planner_digest),
            versions: Versions::current(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> IoResult<()> {
        self.inputs.push(OutputFile {
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
            deterministic: true,
        });
        Ok(())
    }

    /// Registers a file already written under `dir`.
    pub fn output(&mut self, dir: &Path, name: &str, deterministic: bool) -> IoResult<()> {
        self.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: file_sha256(&dir.join(name))?,
            deterministic,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> IoResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> IoResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(IoError::SchemaMismatch {
                path: path.to_path_buf(),
                kind: "manifest",
                found: m.schema_version.to_string(),
                expected: MANIFEST_SCHEMA_VERSION,
                hint: "rerun the original command with this build".into(),
            });
        }
        Ok(m)
    }

    /// Deterministic outputs whose hashes differ from `other`'s.
    pub fn mismatches(&self, other: &Manifest) -> Vec<String> {
        let mut out = Vec::new();
        for o in self.outputs.iter().filter(|o| o.deterministic) {
            match other.outputs.iter().find(|p| p.path == o.path) {
                Some(p) if p.sha256 == o.sha256 => {}
                Some(_) => out.push(o.path.clone()),
                None => out.push(format!("{} (missing)", o.path)),
            }
        }
        out
    }
}
