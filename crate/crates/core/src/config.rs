//! Run configuration: one TOML file per experiment, with dotted-key
//! overrides and a fully resolved snapshot that reproduces the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curiosity::CuriosityConfig;
use crate::envs::{EnvConfig, RandomizationConfig};
use crate::error::{Error, Result};
use crate::rewards::{Preset, RegTerm, RewardConfig, RewardMode};
use crate::stage::StagePlan;
use crate::trainer::{CurriculumConfig, PpoConfig};

/// Environment variable naming the root directory for run outputs.
pub const OUT_ENV: &str = "CONTACT_RL_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanSource {
    File(PathBuf),
    Inline(StagePlan),
}

/// Reward weights on top of the preset. Unset entries take preset or
/// library defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSettings {
    pub w_con: Option<f64>,
    pub w_stage: Option<f64>,
    pub w_curi: Option<f64>,
    pub c01: Option<f64>,
    /// Replaces the default set (every term the environment can measure).
    pub reg_weights: Option<BTreeMap<RegTerm, f64>>,
    /// Merged over the preset's task weights.
    pub task_weights: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default = "default_mode")]
    pub mode: RewardMode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub iterations: usize,
    /// Iterations between intermediate checkpoints; 0 writes only the final one.
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Completed episodes averaged into the progress and return metrics.
    #[serde(default = "default_window")]
    pub progress_window: usize,
    #[serde(default = "default_rnd_lr")]
    pub rnd_learning_rate: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub plan: PlanSource,
    pub env: EnvConfig,
    #[serde(default)]
    pub rewards: RewardSettings,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub curriculum: CurriculumConfig,
    #[serde(default)]
    pub curiosity: CuriosityConfig,
    #[serde(default)]
    pub randomization: RandomizationConfig,
}

fn default_name() -> String {
    "run".into()
}

fn default_preset() -> Preset {
    Preset::Parkour
}

fn default_mode() -> RewardMode {
    RewardMode::Full
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_window() -> usize {
    100
}

fn default_rnd_lr() -> f64 {
    1e-3
}

/// Set `key` (dotted path) in a TOML table. The value is parsed as TOML and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("malformed override key `{key}`")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Split `k=v`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{s}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config(format!("run config is not valid TOML: {e}")))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::config(format!("invalid run config: {e}")))
    }

    /// Read a config file; relative plan paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read run config {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text, overrides)?;
        if let PlanSource::File(p) = &config.plan {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.plan = PlanSource::File(base.join(p));
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::fault(format!("cannot serialize run config: {e}")))
    }

    /// Load the plan, fill every default and check the whole setup.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let plan = match &self.plan {
            PlanSource::Inline(p) => {
                p.validate()?;
                p.clone()
            }
            PlanSource::File(path) => StagePlan::load(path).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::config(format!("cannot read stage plan {}: {source}", path.display()))
                }
                other => other,
            })?,
        };
        if self.iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if self.progress_window == 0 {
            return Err(Error::config("progress_window must be >= 1"));
        }
        self.ppo.validate()?;
        self.curriculum.validate()?;
        self.randomization.validate()?;
        let probe = self.env.build(&plan)?;

        let mut rewards = RewardConfig::from_preset(self.preset, plan.n_con());
        let s = &self.rewards;
        rewards.w_con = s.w_con.unwrap_or(rewards.w_con);
        rewards.w_stage = s.w_stage.unwrap_or(rewards.w_stage);
        rewards.w_curi = s.w_curi.unwrap_or(rewards.w_curi);
        rewards.c01 = s.c01;
        rewards = match &s.reg_weights {
            Some(w) => {
                let mut r = rewards;
                r.reg_weights = w.clone();
                r
            }
            None => rewards.with_default_reg(probe.reg_terms()),
        };
        rewards.task_weights.extend(s.task_weights.clone());
        rewards.validate()?;
        for term in rewards.reg_weights.keys() {
            if !probe.reg_terms().contains(term) {
                return Err(Error::config(format!(
                    "regularization term `{}` is not measured by the {} environment",
                    term.name(),
                    probe.name()
                )));
            }
        }

        let mut snapshot = self.clone();
        snapshot.plan = PlanSource::Inline(plan.clone());
        snapshot.rewards = RewardSettings {
            w_con: Some(rewards.w_con),
            w_stage: Some(rewards.w_stage),
            w_curi: Some(rewards.w_curi),
            c01: rewards.c01,
            reg_weights: Some(rewards.reg_weights.clone()),
            task_weights: rewards.task_weights.clone(),
        };
        Ok(ResolvedRun {
            config: snapshot,
            plan,
            rewards,
        })
    }
}

/// A validated run: the snapshot config (plan inlined, weights explicit),
/// the plan, and the reward configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub plan: StagePlan,
    pub rewards: RewardConfig,
}

impl ResolvedRun {
    pub fn snapshot(&self) -> Result<String> {
        self.config.to_toml_string()
    }

    pub fn config_hash(&self) -> Result<String> {
        Ok(config_hash(&self.snapshot()?))
    }

    /// Output directory of one (mode, seed) run under `root`.
    pub fn run_dir(&self, root: &Path, seed: u64) -> PathBuf {
        root.join(&self.config.name).join(self.config.mode.name()).join(format!("seed-{seed}"))
    }
}

/// SHA-256 of a config text, hex encoded.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output root: explicit flag, then the environment variable, then the
/// config, then `runs/`.
pub fn output_root(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV) {
        return PathBuf::from(p);
    }
    config.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
}
