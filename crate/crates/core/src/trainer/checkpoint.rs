use std::path::Path;

use serde::{Deserialize, Serialize};

use super::curriculum::CurriculumState;
use super::normalizer::{ReturnScaler, RunningNorm};
use super::ppo::Learner;
use crate::curiosity::{CuriosityModule, Rnd};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to evaluate or inspect a trained policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub iteration: usize,
    pub seed: u64,
    pub env: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    /// SHA-256 of `config`.
    pub config_hash: String,
    /// Resolved run configuration (TOML).
    pub config: String,
    pub learner: Learner,
    pub obs_norm: RunningNorm,
    pub return_scaler: ReturnScaler,
    pub curiosity: CuriosityModule,
    pub rnd: Option<Rnd>,
    pub rnd_mean: RunningNorm,
    pub curriculum: CurriculumState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(CHECKPOINT_VERSION as u64) {
            return Err(Error::fault(format!(
                "checkpoint {} has version {version:?}, expected {CHECKPOINT_VERSION}",
                path.display()
            )));
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        if crate::config::config_hash(&ckpt.config) != ckpt.config_hash {
            return Err(Error::fault(format!("checkpoint {} config hash mismatch", path.display())));
        }
        Ok(ckpt)
    }
}
