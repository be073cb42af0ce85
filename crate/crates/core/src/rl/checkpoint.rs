use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::agent::{Agent, TrainerConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Named agents plus the trainer settings they were trained with, stored as
/// JSON with round-trip float formatting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub trainer: TrainerConfig,
    pub agents: Vec<(String, Agent)>,
}

impl Checkpoint {
    pub fn new(trainer: TrainerConfig, agents: Vec<(String, Agent)>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            trainer,
            agents,
        }
    }

    pub fn agent(&self, name: &str) -> Option<&Agent> {
        self.agents.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
