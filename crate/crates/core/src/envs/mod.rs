//! Planar toy worlds that exercise the contact-stage machinery.
//!
//! Both worlds integrate with semi-implicit Euler at 200 Hz and accept
//! actions at 50 Hz. Each exposes a left-right mirror map used for symmetry
//! augmentation.

pub mod hopper;
pub mod pusher;
pub mod randomization;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::curiosity::ObsRanges;
use crate::error::{Error, Result};
use crate::rewards::{RegTerm, StepSignals};
use crate::stage::{StagePlan, StageStatus};

pub use hopper::{HopperConfig, HopperEnv};
pub use pusher::{PusherConfig, PusherEnv};
pub use randomization::{DynamicsSample, RandomizationConfig};

/// Outcome of one control step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub signals: StepSignals,
    /// Input to the hashed visit counter.
    pub curiosity_obs: Vec<f64>,
    pub curiosity_obs_mirrored: Vec<f64>,
    /// Fall, fault, or other true terminal state.
    pub terminated: bool,
    /// Time limit or plan completion; the value of `obs` should be bootstrapped.
    pub truncated: bool,
    pub success: bool,
    pub fault: Option<String>,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn plan(&self) -> &StagePlan;
    fn status(&self) -> StageStatus;
    /// `None` turns randomization off from the next reset on.
    fn set_randomization(&mut self, config: Option<RandomizationConfig>);
    fn dynamics(&self) -> DynamicsSample;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Transition;
    fn mirror_obs(&self, obs: &[f64]) -> Vec<f64>;
    fn mirror_act(&self, act: &[f64]) -> Vec<f64>;
    fn curiosity_ranges(&self) -> ObsRanges;
    /// Regularization terms this world can measure.
    fn reg_terms(&self) -> &'static [RegTerm];
    fn state_columns(&self) -> Vec<String>;
    fn state_row(&self) -> Vec<f64>;
}

/// Signed index permutation: `y[i] = sign[i] * x[perm[i]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorMap {
    perm: Vec<usize>,
    sign: Vec<f64>,
}

impl MirrorMap {
    pub fn new(perm: Vec<usize>, sign: Vec<f64>) -> Result<Self> {
        let n = perm.len();
        if sign.len() != n {
            return Err(Error::fault("mirror permutation and sign map differ in length"));
        }
        for i in 0..n {
            let j = perm[i];
            if j >= n || perm[j] != i || sign[i] * sign[j] != 1.0 || sign[i].abs() != 1.0 {
                return Err(Error::fault(format!("mirror map is not an involution at index {i}")));
            }
        }
        Ok(Self { perm, sign })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            sign: vec![1.0; n],
        }
    }

    /// Concatenate maps acting on consecutive blocks.
    pub fn concat(blocks: &[MirrorMap]) -> Self {
        let mut perm = Vec::new();
        let mut sign = Vec::new();
        for b in blocks {
            let off = perm.len();
            perm.extend(b.perm.iter().map(|p| p + off));
            sign.extend_from_slice(&b.sign);
        }
        Self { perm, sign }
    }

    pub fn repeat(&self, times: usize) -> Self {
        Self::concat(&vec![self.clone(); times])
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.perm.len(), "mirror input has the wrong dimension");
        self.perm.iter().zip(&self.sign).map(|(&p, &s)| s * x[p]).collect()
    }
}

/// Fixed-depth history of observation frames, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    depth: usize,
    frames: VecDeque<Vec<f64>>,
}

impl FrameStack {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            frames: VecDeque::with_capacity(depth),
        }
    }

    /// Fill the history with copies of the first frame.
    pub fn reset(&mut self, frame: Vec<f64>) {
        self.frames.clear();
        for _ in 0..self.depth {
            self.frames.push_back(frame.clone());
        }
    }

    pub fn push(&mut self, frame: Vec<f64>) {
        if self.frames.len() == self.depth {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.frames.iter().flatten().copied().collect()
    }

    pub fn map_frames(&mut self, f: impl Fn(&[f64]) -> Vec<f64>) {
        for frame in self.frames.iter_mut() {
            *frame = f(frame);
        }
    }
}

/// Seed for a given (run, environment, episode) triple.
pub fn derive_seed(base: u64, env_index: u64, episode: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(base) ^ env_index) ^ episode)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Hopper(HopperConfig),
    Pusher(PusherConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Hopper(_) => "hopper",
            EnvConfig::Pusher(_) => "pusher",
        }
    }

    pub fn build(&self, plan: &StagePlan) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::Hopper(c) => Box::new(HopperEnv::new(c.clone(), plan.clone())?),
            EnvConfig::Pusher(c) => Box::new(PusherEnv::new(c.clone(), plan.clone())?),
        })
    }
}

/// N independent environments stepped in lockstep with automatic resets.
pub struct VecEnv {
    envs: Vec<Box<dyn Environment>>,
    seed: u64,
    episodes: Vec<u64>,
    obs: Vec<Vec<f64>>,
}

impl VecEnv {
    pub fn new(config: &EnvConfig, plan: &StagePlan, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("need at least one environment"));
        }
        let envs = (0..n).map(|_| config.build(plan)).collect::<Result<Vec<_>>>()?;
        let mut v = Self {
            envs,
            seed,
            episodes: vec![0; n],
            obs: Vec::new(),
        };
        v.reset_all();
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn env(&self, i: usize) -> &dyn Environment {
        self.envs[i].as_ref()
    }

    pub fn obs_dim(&self) -> usize {
        self.envs[0].obs_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.envs[0].act_dim()
    }

    pub fn set_randomization(&mut self, config: Option<RandomizationConfig>) {
        for e in &mut self.envs {
            e.set_randomization(config.clone());
        }
    }

    /// Start a fresh episode everywhere.
    pub fn reset_all(&mut self) {
        self.obs = (0..self.envs.len()).map(|i| self.reset_one(i)).collect();
    }

    fn reset_one(&mut self, i: usize) -> Vec<f64> {
        let seed = derive_seed(self.seed, i as u64, self.episodes[i]);
        self.episodes[i] += 1;
        self.envs[i].reset(seed)
    }

    /// Observations the policy should act on next.
    pub fn observations(&self) -> &[Vec<f64>] {
        &self.obs
    }

    /// Step every environment. Finished episodes are reset immediately; the
    /// returned transitions keep their final observation.
    pub fn step(&mut self, actions: &[Vec<f64>]) -> Result<Vec<Transition>> {
        if actions.len() != self.envs.len() {
            return Err(Error::fault(format!(
                "expected {} actions, got {}",
                self.envs.len(),
                actions.len()
            )));
        }
        let mut out = Vec::with_capacity(actions.len());
        for (i, a) in actions.iter().enumerate() {
            let t = self.envs[i].step(a);
            self.obs[i] = if t.done() { self.reset_one(i) } else { t.obs.clone() };
            out.push(t);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_map_rejects_non_involutions() {
        assert!(MirrorMap::new(vec![1, 2, 0], vec![1.0; 3]).is_err());
        assert!(MirrorMap::new(vec![1, 0], vec![1.0, -1.0]).is_err());
        let m = MirrorMap::new(vec![1, 0, 2], vec![1.0, 1.0, -1.0]).unwrap();
        assert_eq!(m.apply(&[1.0, 2.0, 3.0]), vec![2.0, 1.0, -3.0]);
    }

    #[test]
    fn frame_stack_starts_with_copies() {
        let mut s = FrameStack::new(3);
        s.reset(vec![1.0, 2.0]);
        assert_eq!(s.flatten(), vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        s.push(vec![3.0, 4.0]);
        assert_eq!(s.flatten(), vec![1.0, 2.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }
}
