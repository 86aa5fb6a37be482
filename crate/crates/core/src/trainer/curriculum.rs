//! Three-phase schedule: explore with curiosity, then add dynamics
//! randomization, then ramp regularization up to twice its base weight.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    /// Iterations of return history the plateau detector compares.
    pub plateau_window: usize,
    /// Relative improvement below which returns count as converged.
    pub plateau_threshold: f64,
    /// Hard caps on the length of phases 1 and 2 (iterations).
    pub phase1_max: Option<usize>,
    pub phase2_max: Option<usize>,
    /// Phase 3: iterations between regularization increments.
    pub reg_interval: usize,
    pub reg_step: f64,
    pub reg_max_steps: u32,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            plateau_window: 100,
            plateau_threshold: 0.01,
            phase1_max: None,
            phase2_max: None,
            reg_interval: 2000,
            reg_step: 0.2,
            reg_max_steps: 5,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.plateau_window < 2 {
            return Err(Error::config("plateau_window must be >= 2"));
        }
        if self.reg_interval == 0 {
            return Err(Error::config("reg_interval must be >= 1"));
        }
        let top = 1.0 + self.reg_step * self.reg_max_steps as f64;
        if !(self.reg_step >= 0.0) || top > 2.0 + 1e-12 {
            return Err(Error::config("regularization ramp must stay within [1, 2]"));
        }
        Ok(())
    }
}

/// Fires once the recent half of a window improves on the older half by
/// less than the threshold (relative).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauDetector {
    window: usize,
    threshold: f64,
    history: VecDeque<f64>,
}

impl PlateauDetector {
    pub fn new(window: usize, threshold: f64) -> Self {
        Self {
            window,
            threshold,
            history: VecDeque::with_capacity(window),
        }
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }

    pub fn push(&mut self, value: f64) -> bool {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(value);
        if self.history.len() < self.window {
            return false;
        }
        let half = self.window / 2;
        let older: f64 = self.history.iter().take(half).sum::<f64>() / half as f64;
        let recent: f64 = self.history.iter().skip(self.window - half).sum::<f64>() / half as f64;
        let improvement = (recent - older) / older.abs().max(1e-8);
        improvement < self.threshold
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub phase: u8,
    pub iteration: usize,
    pub phase_start: usize,
    pub reg_steps: u32,
    pub reg_scale: f64,
    pub monitor: PlateauDetector,
}

impl CurriculumState {
    pub fn new(config: &CurriculumConfig) -> Self {
        Self {
            phase: 1,
            iteration: 0,
            phase_start: 0,
            reg_steps: 0,
            reg_scale: 1.0,
            monitor: PlateauDetector::new(config.plateau_window, config.plateau_threshold),
        }
    }

    /// Multiplier on the curiosity weight.
    pub fn curiosity_multiplier(&self) -> f64 {
        if self.phase == 1 {
            1.0
        } else {
            0.0
        }
    }

    pub fn randomize(&self) -> bool {
        self.phase >= 2
    }

    /// Advance by one finished iteration with its mean return.
    pub fn tick(&self, config: &CurriculumConfig, mean_return: f64) -> CurriculumState {
        let mut next = self.clone();
        next.iteration += 1;
        let in_phase = next.iteration - next.phase_start;
        match next.phase {
            1 | 2 => {
                let cap = if next.phase == 1 { config.phase1_max } else { config.phase2_max };
                let plateau = next.monitor.push(mean_return);
                if plateau || cap.is_some_and(|c| in_phase >= c) {
                    next.phase += 1;
                    next.phase_start = next.iteration;
                    next.monitor.clear();
                }
            }
            _ => {
                if in_phase > 0 && in_phase % config.reg_interval == 0 && next.reg_steps < config.reg_max_steps {
                    next.reg_steps += 1;
                    next.reg_scale = 1.0 + config.reg_step * next.reg_steps as f64;
                }
            }
        }
        next
    }
}
