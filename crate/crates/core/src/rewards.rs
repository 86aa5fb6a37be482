//! Reward terms for contact-stage tasks.
//!
//! The total reward per step is
//!
//! ```text
//! r_total = w_con * r_con + w_stage * r_stage + w_curi * r_curi + reg_scale * r_reg + r_task
//! ```
//!
//! where `r_con` is the dense contact reward, `r_stage` the stage-count
//! reward, `r_curi` a curiosity bonus, `r_reg` the regularization library
//! and `r_task` the (already weighted) task-specific terms.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stage::StageStatus;

/// Dense contact reward: every correct contact earns 1, every wrong contact
/// costs `n_con` once the first stage has been fulfilled, and fulfilling the
/// whole stage earns `2 * n_con^2`.
pub fn contact_reward(
    n_corr: usize,
    n_wrong: usize,
    n_con: usize,
    n_stage: usize,
    f_con: bool,
    f_task: bool,
) -> f64 {
    let n_con = n_con as f64;
    let penalty = if n_stage > 0 {
        n_con * n_wrong as f64
    } else {
        0.0
    };
    let bonus = if f_con && f_task {
        2.0 * n_con * n_con
    } else {
        0.0
    };
    n_corr as f64 - penalty + bonus
}

/// Number of fulfilled stages, paid only while the task goal holds.
pub fn stage_count_reward(n_stage: usize, f_task: bool) -> f64 {
    if f_task {
        n_stage as f64
    } else {
        0.0
    }
}

/// Sparse baseline: `c01` when the stage is fulfilled, zero otherwise.
pub fn zero_one_reward(f_con: bool, f_task: bool, c01: f64) -> f64 {
    if f_con && f_task {
        c01
    } else {
        0.0
    }
}

/// Regularization terms with their default weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegTerm {
    YawRate,
    Torques,
    TorqueOverlimit,
    DofAcceleration,
    DofVelocities,
    ActionRate,
    Termination,
    FootContactForces,
    FootOrientation,
    Stumble,
    Slippage,
    FeetAirTime,
    NoFly,
}

impl RegTerm {
    pub const ALL: [RegTerm; 13] = [
        RegTerm::YawRate,
        RegTerm::Torques,
        RegTerm::TorqueOverlimit,
        RegTerm::DofAcceleration,
        RegTerm::DofVelocities,
        RegTerm::ActionRate,
        RegTerm::Termination,
        RegTerm::FootContactForces,
        RegTerm::FootOrientation,
        RegTerm::Stumble,
        RegTerm::Slippage,
        RegTerm::FeetAirTime,
        RegTerm::NoFly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegTerm::YawRate => "yaw_rate",
            RegTerm::Torques => "torques",
            RegTerm::TorqueOverlimit => "torque_overlimit",
            RegTerm::DofAcceleration => "dof_acceleration",
            RegTerm::DofVelocities => "dof_velocities",
            RegTerm::ActionRate => "action_rate",
            RegTerm::Termination => "termination",
            RegTerm::FootContactForces => "foot_contact_forces",
            RegTerm::FootOrientation => "foot_orientation",
            RegTerm::Stumble => "stumble",
            RegTerm::Slippage => "slippage",
            RegTerm::FeetAirTime => "feet_air_time",
            RegTerm::NoFly => "no_fly",
        }
    }

    pub fn from_name(name: &str) -> Option<RegTerm> {
        RegTerm::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn default_weight(self) -> f64 {
        match self {
            RegTerm::YawRate => -0.1,
            RegTerm::Torques => -0.5,
            RegTerm::TorqueOverlimit => -500.0,
            RegTerm::DofAcceleration => -0.000005,
            RegTerm::DofVelocities => -0.003,
            RegTerm::ActionRate => -250.0,
            RegTerm::Termination => -200.0,
            RegTerm::FootContactForces => -0.005,
            RegTerm::FootOrientation => -50.0,
            RegTerm::Stumble => -100.0,
            RegTerm::Slippage => -5.0,
            RegTerm::FeetAirTime => 20.0,
            RegTerm::NoFly => 10.0,
        }
    }

    /// Evaluate this term's expression, or `None` when the signal is missing.
    pub fn expression(self, s: &RegSignals) -> Option<f64> {
        match self {
            RegTerm::YawRate => s.yaw_rate.map(|w| w * w),
            RegTerm::Torques => s
                .torques
                .as_ref()
                .map(|t| t.iter().map(|&(tau, lim)| (tau / lim).powi(2)).sum()),
            RegTerm::TorqueOverlimit => s.torques.as_ref().map(|t| {
                t.iter()
                    .map(|&(tau, lim)| (tau.abs() / lim - 0.95).max(0.0))
                    .sum()
            }),
            RegTerm::DofAcceleration => s.dof_acc.as_ref().map(|v| v.iter().map(|x| x * x).sum()),
            RegTerm::DofVelocities => s.dof_vel.as_ref().map(|v| v.iter().map(|x| x * x).sum()),
            RegTerm::ActionRate => s
                .action_delta
                .as_ref()
                .map(|v| v.iter().map(|x| x * x).sum()),
            RegTerm::Termination => s.terminated.map(|t| if t { 1.0 } else { 0.0 }),
            RegTerm::FootContactForces => s
                .foot_forces
                .as_ref()
                .map(|f| f.iter().map(|&f| (f.abs() - 550.0).max(0.0)).sum()),
            RegTerm::FootOrientation => s
                .foot_contact_angles
                .as_ref()
                .map(|a| a.iter().map(|x| x.sin().abs()).sum()),
            RegTerm::Stumble => s
                .foot_horizontal_impact
                .as_ref()
                .map(|v| v.iter().filter(|&&b| b).count() as f64),
            RegTerm::Slippage => s.foot_slip.as_ref().map(|v| {
                v.iter()
                    .map(|&(speed, contact)| if contact { speed * speed } else { 0.0 })
                    .sum()
            }),
            RegTerm::FeetAirTime => s
                .touchdown_air_times
                .as_ref()
                .map(|v| v.iter().map(|t| t - 0.5).sum()),
            RegTerm::NoFly => s
                .foot_contact
                .as_ref()
                .map(|v| if v.iter().any(|&c| c) { 1.0 } else { 0.0 }),
        }
    }
}

/// Raw statistics an environment exposes for regularization. `None` means
/// the environment cannot measure it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegSignals {
    /// Base yaw rate (rad/s).
    pub yaw_rate: Option<f64>,
    /// Per-joint (torque, torque limit).
    pub torques: Option<Vec<(f64, f64)>>,
    pub dof_acc: Option<Vec<f64>>,
    pub dof_vel: Option<Vec<f64>>,
    /// Per-joint change of the action since the previous step.
    pub action_delta: Option<Vec<f64>>,
    pub terminated: Option<bool>,
    pub foot_forces: Option<Vec<f64>>,
    pub foot_contact_angles: Option<Vec<f64>>,
    pub foot_horizontal_impact: Option<Vec<bool>>,
    /// Per-foot (speed, in contact).
    pub foot_slip: Option<Vec<(f64, bool)>>,
    /// Air times of feet that touched down this step.
    pub touchdown_air_times: Option<Vec<f64>>,
    pub foot_contact: Option<Vec<bool>>,
}

/// Sum of enabled terms, scaled by `reg_scale`.
///
/// Every term with an entry in `weights` is enabled; a missing signal for an
/// enabled term is a configuration error.
pub fn regularization_reward(
    signals: &RegSignals,
    weights: &BTreeMap<RegTerm, f64>,
    reg_scale: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for (&term, &w) in weights {
        let value = term.expression(signals).ok_or_else(|| {
            Error::config(format!(
                "regularization term `{}` is enabled but the environment does not provide its signal",
                term.name()
            ))
        })?;
        sum += w * value;
    }
    Ok(reg_scale * sum)
}

/// Posture tracking reward `w * exp(-|err_rot|/pi) * exp(-|err_pos|)`.
pub fn task_reward_posture(err_rot: f64, err_pos: f64, w_task: f64) -> f64 {
    w_task * (-err_rot.abs() / PI).exp() * (-err_pos.abs()).exp()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TransportInputs {
    pub d_obj2dest: f64,
    pub d_left2obj: f64,
    pub d_right2obj: f64,
    /// Direction of the destination in the base frame.
    pub theta_dest: f64,
    /// Direction of the object in the base frame.
    pub theta_obj: f64,
    pub n_stage: usize,
}

/// Approach-and-transport reward. With `angle_gates` off both direction
/// conditions are treated as satisfied.
pub fn task_reward_transport(x: &TransportInputs, w_box: f64, w_hand: f64, angle_gates: bool) -> f64 {
    let gate_dest = !angle_gates || x.theta_dest.abs() < PI / 2.0;
    let gate_obj = !angle_gates || x.theta_obj.abs() < PI / 6.0;
    let moving = if x.n_stage > 0 && gate_dest {
        w_box * (-x.d_obj2dest).exp()
    } else {
        0.0
    };
    let approach = if gate_obj {
        w_hand * (-(x.d_left2obj + x.d_right2obj) / 2.0).exp()
    } else {
        0.0
    };
    moving + approach
}

/// Arm-spread term: lateral hand offsets signed by the side of their target
/// boxes, `y_l * sign_l + y_r * sign_r`.
pub fn signed_spread(y_left: f64, sign_left: f64, y_right: f64, sign_right: f64) -> f64 {
    y_left * sign_left + y_right * sign_right
}

/// Gaussian proximity `exp(-(d / sigma)^2)`.
pub fn gaussian_proximity(d: f64, sigma: f64) -> f64 {
    (-(d / sigma).powi(2)).exp()
}

/// Exponential proximity summed over effectors, `sum exp(-d_j / scale)`.
pub fn exp_proximity_sum(distances: &[f64], scale: f64) -> f64 {
    distances.iter().map(|d| (-d / scale).exp()).sum()
}

/// Reward weight presets for the four reference task families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Parkour,
    LocoManipulation,
    Dancing,
    Cliffside,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Parkour,
        Preset::LocoManipulation,
        Preset::Dancing,
        Preset::Cliffside,
    ];

    /// (w_con, w_stage, w_curi)
    pub fn weights(self) -> (f64, f64, f64) {
        match self {
            Preset::Parkour => (120.0, 160.0, 20000.0),
            Preset::LocoManipulation => (40.0, 160.0, 40000.0),
            Preset::Dancing => (10.0, 5.0, 5000.0),
            Preset::Cliffside => (20.0, 40.0, 10000.0),
        }
    }

    /// Task-term weights used with this preset.
    pub fn task_weights(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            Preset::Parkour => &[("posture", 30.0)],
            Preset::LocoManipulation => &[("box", 200.0), ("hand", 100.0)],
            Preset::Dancing => &[("hand", 5.0), ("foot", 10.0)],
            Preset::Cliffside => &[("base", 50.0), ("ee", 5.0)],
        };
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }
}

/// Which contact and curiosity terms enter the total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    Full,
    ZeroOne,
    NoStage,
    NoCuriosity,
    RndCuriosity,
}

impl RewardMode {
    pub const ALL: [RewardMode; 5] = [
        RewardMode::Full,
        RewardMode::ZeroOne,
        RewardMode::NoStage,
        RewardMode::NoCuriosity,
        RewardMode::RndCuriosity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewardMode::Full => "full",
            RewardMode::ZeroOne => "zero-one",
            RewardMode::NoStage => "no-stage",
            RewardMode::NoCuriosity => "no-curiosity",
            RewardMode::RndCuriosity => "rnd-curiosity",
        }
    }

    pub fn from_name(name: &str) -> Option<RewardMode> {
        RewardMode::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn uses_count_curiosity(self) -> bool {
        !matches!(self, RewardMode::NoCuriosity | RewardMode::RndCuriosity)
    }
}

impl std::fmt::Display for RewardMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub w_con: f64,
    pub w_stage: f64,
    pub w_curi: f64,
    pub n_con: usize,
    #[serde(default)]
    pub reg_weights: BTreeMap<RegTerm, f64>,
    #[serde(default = "one")]
    pub reg_scale: f64,
    #[serde(default)]
    pub task_weights: BTreeMap<String, f64>,
    /// Zero-one reward magnitude; defaults to `n_con + 2 n_con^2`.
    #[serde(default)]
    pub c01: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl RewardConfig {
    pub fn from_preset(preset: Preset, n_con: usize) -> Self {
        let (w_con, w_stage, w_curi) = preset.weights();
        Self {
            w_con,
            w_stage,
            w_curi,
            n_con,
            reg_weights: BTreeMap::new(),
            reg_scale: 1.0,
            task_weights: preset.task_weights(),
            c01: None,
        }
    }

    /// Enable the given terms at their default weights.
    pub fn with_default_reg(mut self, terms: &[RegTerm]) -> Self {
        for &t in terms {
            self.reg_weights.insert(t, t.default_weight());
        }
        self
    }

    pub fn c01(&self) -> f64 {
        self.c01.unwrap_or_else(|| {
            let n = self.n_con as f64;
            n + 2.0 * n * n
        })
    }

    pub fn task_weight(&self, name: &str) -> f64 {
        self.task_weights.get(name).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_con == 0 {
            return Err(Error::config("n_con must be >= 1"));
        }
        for (name, w) in [("w_con", self.w_con), ("w_stage", self.w_stage), ("w_curi", self.w_curi)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::config(format!("{name} must be a finite non-negative number")));
            }
        }
        if !(1.0..=2.0).contains(&self.reg_scale) {
            return Err(Error::config("reg_scale must lie in [1, 2]"));
        }
        Ok(())
    }
}

/// Unweighted per-term rewards for one step. `r_task` is already weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardParts {
    pub r_con: f64,
    pub r_stage: f64,
    pub r_curi: f64,
    /// Unscaled regularization sum.
    pub r_reg: f64,
    pub r_task: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_con: f64,
    pub r_stage: f64,
    pub r_curi: f64,
    pub r_reg: f64,
    pub r_task: f64,
    pub r_total: f64,
}

impl RewardBreakdown {
    pub const COLUMNS: [&'static str; 6] = ["r_con", "r_stage", "r_curi", "r_reg", "r_task", "r_total"];

    pub fn values(&self) -> [f64; 6] {
        [self.r_con, self.r_stage, self.r_curi, self.r_reg, self.r_task, self.r_total]
    }
}

pub fn total_reward(parts: &RewardParts, config: &RewardConfig) -> RewardBreakdown {
    RewardBreakdown {
        r_con: parts.r_con,
        r_stage: parts.r_stage,
        r_curi: parts.r_curi,
        r_reg: parts.r_reg,
        r_task: parts.r_task,
        r_total: config.w_con * parts.r_con
            + config.w_stage * parts.r_stage
            + config.w_curi * parts.r_curi
            + config.reg_scale * parts.r_reg
            + parts.r_task,
    }
}

/// Task-specific inputs of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum TaskSignals {
    #[default]
    None,
    Posture { err_rot: f64, err_pos: f64 },
    Transport { inputs: TransportInputs, angle_gates: bool },
}

/// Everything an environment reports for reward assembly after one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepSignals {
    /// Stage bookkeeping after this step's advancement.
    pub status: StageStatus,
    pub reg: RegSignals,
    pub task: TaskSignals,
}

/// Per-term rewards for one step under an ablation mode. The curiosity
/// bonus is computed by the caller and passed through.
pub fn reward_parts(signals: &StepSignals, config: &RewardConfig, mode: RewardMode, r_curi: f64) -> Result<RewardParts> {
    let s = &signals.status;
    let r_con = match mode {
        RewardMode::ZeroOne => zero_one_reward(s.f_con, s.f_task, config.c01()),
        _ => contact_reward(s.n_corr, s.n_wrong, config.n_con, s.n_stage, s.f_con, s.f_task),
    };
    let r_stage = match mode {
        RewardMode::NoStage => 0.0,
        _ => stage_count_reward(s.n_stage, s.f_task),
    };
    let r_task = match signals.task {
        TaskSignals::None => 0.0,
        TaskSignals::Posture { err_rot, err_pos } => task_reward_posture(err_rot, err_pos, config.task_weight("posture")),
        TaskSignals::Transport { inputs, angle_gates } => {
            task_reward_transport(&inputs, config.task_weight("box"), config.task_weight("hand"), angle_gates)
        }
    };
    Ok(RewardParts {
        r_con,
        r_stage,
        r_curi,
        r_reg: regularization_reward(&signals.reg, &config.reg_weights, 1.0)?,
        r_task,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_contact_reward() {
        assert_eq!(contact_reward(1, 1, 2, 0, false, true), 1.0);
        assert_eq!(contact_reward(1, 1, 2, 3, false, true), -1.0);
        for n_stage in 0..4 {
            assert_eq!(contact_reward(2, 0, 2, n_stage, true, true), 10.0);
        }
    }

    #[test]
    fn wrong_contacts_are_free_in_the_first_stage() {
        for n_wrong in 0..5 {
            assert_eq!(contact_reward(1, n_wrong, 4, 0, false, false), 1.0);
        }
    }

    #[test]
    fn contact_reward_maximizer_by_enumeration() {
        for n_con in 1..=4usize {
            for n_stage in [0usize, 1, 3] {
                let mut best = f64::NEG_INFINITY;
                let mut argmax = Vec::new();
                for n_corr in 0..=n_con {
                    for n_wrong in 0..=(n_con - n_corr) {
                        for f_con in [false, true] {
                            // Fulfillment implies every constrained effector is correct.
                            if f_con && (n_corr != n_con || n_wrong != 0) {
                                continue;
                            }
                            for f_task in [false, true] {
                                let r = contact_reward(n_corr, n_wrong, n_con, n_stage, f_con, f_task);
                                if r > best {
                                    best = r;
                                    argmax.clear();
                                }
                                if r == best {
                                    argmax.push((n_corr, n_wrong, f_con, f_task));
                                }
                            }
                        }
                    }
                }
                assert_eq!(argmax, vec![(n_con, 0, true, true)], "n_con={n_con}");
            }
        }
    }

    #[test]
    fn stage_count_examples() {
        assert_eq!(stage_count_reward(0, true), 0.0);
        assert_eq!(stage_count_reward(3, true), 3.0);
        assert_eq!(stage_count_reward(5, false), 0.0);
        for n in 0..10 {
            assert!(stage_count_reward(n + 1, true) >= stage_count_reward(n, true));
        }
    }

    #[test]
    fn zero_one_examples() {
        assert_eq!(zero_one_reward(true, true, 10.0), 10.0);
        assert_eq!(zero_one_reward(true, false, 10.0), 0.0);
        assert_eq!(zero_one_reward(false, true, 10.0), 0.0);
    }

    #[test]
    fn c01_defaults_to_dense_maximum() {
        let cfg = RewardConfig::from_preset(Preset::Parkour, 2);
        assert_eq!(cfg.c01(), 10.0);
        assert_eq!(cfg.c01(), contact_reward(2, 0, 2, 1, true, true));
    }

    #[test]
    fn termination_row() {
        let weights = BTreeMap::from([(RegTerm::Termination, RegTerm::Termination.default_weight())]);
        let s = RegSignals {
            terminated: Some(true),
            ..Default::default()
        };
        assert_eq!(regularization_reward(&s, &weights, 1.0).unwrap(), -200.0);
    }

    #[test]
    fn quiet_signals_give_zero() {
        let terms = [
            RegTerm::YawRate,
            RegTerm::DofAcceleration,
            RegTerm::DofVelocities,
            RegTerm::ActionRate,
            RegTerm::Termination,
            RegTerm::Slippage,
        ];
        let weights: BTreeMap<_, _> = terms.iter().map(|&t| (t, t.default_weight())).collect();
        let s = RegSignals {
            yaw_rate: Some(0.0),
            dof_acc: Some(vec![0.0; 3]),
            dof_vel: Some(vec![0.0; 3]),
            action_delta: Some(vec![0.0; 3]),
            terminated: Some(false),
            foot_slip: Some(vec![(0.0, true), (0.0, false)]),
            ..Default::default()
        };
        assert_eq!(regularization_reward(&s, &weights, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn enabled_term_without_signal_is_rejected() {
        let weights = BTreeMap::from([(RegTerm::Torques, -0.5)]);
        let err = regularization_reward(&RegSignals::default(), &weights, 1.0).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn reg_term_names_round_trip() {
        for t in RegTerm::ALL {
            assert_eq!(RegTerm::from_name(t.name()), Some(t));
        }
    }

    #[test]
    fn posture_examples() {
        assert_eq!(task_reward_posture(0.0, 0.0, 30.0), 30.0);
        let e = 30.0 * (-1.0f64).exp();
        assert!((task_reward_posture(PI, 0.0, 30.0) - e).abs() < 1e-12);
        assert!((task_reward_posture(0.0, 1.0, 30.0) - e).abs() < 1e-12);
        assert!((e - 11.036).abs() < 1e-3);
    }

    #[test]
    fn transport_examples() {
        let at_box = TransportInputs {
            n_stage: 1,
            ..Default::default()
        };
        assert_eq!(task_reward_transport(&at_box, 200.0, 100.0, true), 300.0);
        let first_stage = TransportInputs {
            d_obj2dest: 0.0,
            d_left2obj: 3.0,
            d_right2obj: 5.0,
            n_stage: 0,
            ..Default::default()
        };
        let r = task_reward_transport(&first_stage, 200.0, 100.0, true);
        assert!((r - 100.0 * (-4.0f64).exp()).abs() < 1e-12);
        let facing_away = TransportInputs {
            theta_dest: 2.0,
            theta_obj: 1.0,
            n_stage: 1,
            ..Default::default()
        };
        assert_eq!(task_reward_transport(&facing_away, 200.0, 100.0, true), 0.0);
        assert_eq!(task_reward_transport(&facing_away, 200.0, 100.0, false), 300.0);
    }

    #[test]
    fn parkour_weights_in_total() {
        let cfg = RewardConfig::from_preset(Preset::Parkour, 2);
        let parts = RewardParts {
            r_con: 1.0,
            r_stage: 1.0,
            r_curi: 1.0,
            r_reg: -3.0,
            r_task: 7.0,
        };
        let b = total_reward(&parts, &cfg);
        assert_eq!(b.r_total, 120.0 + 160.0 + 20000.0 - 3.0 + 7.0);
        assert_eq!(total_reward(&RewardParts::default(), &cfg).r_total, 0.0);
    }

    #[test]
    fn auxiliary_forms() {
        assert_eq!(signed_spread(0.3, 1.0, -0.2, -1.0), 0.5);
        assert!((gaussian_proximity(0.1, 0.1) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(exp_proximity_sum(&[0.0; 4], 0.2), 4.0);
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = RewardConfig::from_preset(Preset::LocoManipulation, 2)
            .with_default_reg(&[RegTerm::ActionRate, RegTerm::Termination]);
        let text = toml::to_string(&cfg).unwrap();
        let back: RewardConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
        let mut bad = cfg.clone();
        bad.reg_scale = 2.5;
        assert!(bad.validate().is_err());
        bad.reg_scale = 1.0;
        bad.n_con = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ablation_modes_change_only_their_terms() {
        let cfg = RewardConfig::from_preset(Preset::Parkour, 2).with_default_reg(&[RegTerm::Termination]);
        let signals = StepSignals {
            status: StageStatus {
                n_stage: 2,
                f_con: true,
                f_task: true,
                n_corr: 2,
                ..Default::default()
            },
            reg: RegSignals {
                terminated: Some(false),
                ..Default::default()
            },
            task: TaskSignals::Posture { err_rot: 0.0, err_pos: 0.0 },
        };
        let full = reward_parts(&signals, &cfg, RewardMode::Full, 0.5).unwrap();
        assert_eq!((full.r_con, full.r_stage, full.r_curi, full.r_task), (10.0, 2.0, 0.5, 30.0));
        let z = reward_parts(&signals, &cfg, RewardMode::ZeroOne, 0.5).unwrap();
        assert_eq!((z.r_con, z.r_stage), (10.0, 2.0));
        let ns = reward_parts(&signals, &cfg, RewardMode::NoStage, 0.5).unwrap();
        assert_eq!((ns.r_con, ns.r_stage), (10.0, 0.0));
    }
}
