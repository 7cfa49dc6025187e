//! `manifest.toml`: everything needed to reproduce a run's outputs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use risee::RawConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiment::ExperimentSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// SHA-256 of the canonical experiment and config TOML.
    pub input_hash: String,
    pub experiment: ExperimentSpec,
    pub config: RawConfig,
}

#[derive(Serialize)]
struct HashInput<'a> {
    experiment: &'a ExperimentSpec,
    config: &'a RawConfig,
}

pub fn input_hash(spec: &ExperimentSpec, config: &RawConfig) -> String {
    let text = toml::to_string(&HashInput {
        experiment: spec,
        config,
    })
    .expect("manifest input serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(spec: &ExperimentSpec, config: &RawConfig) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_hash: input_hash(spec, config),
            experiment: spec.clone(),
            config: config.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).context("parse manifest")?;
        if m.schema_version != SCHEMA_VERSION {
            bail!("manifest schema_version {} is not supported (expected {SCHEMA_VERSION})", m.schema_version);
        }
        let expected = input_hash(&m.experiment, &m.config);
        if m.input_hash != expected {
            bail!("manifest input_hash does not match its contents");
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("manifest {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).with_context(|| format!("write {}", path.display()))
    }
}
