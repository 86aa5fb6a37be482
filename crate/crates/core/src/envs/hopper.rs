//! Side-view biped hopper crossing a course of stepping stones.
//!
//! A rigid torso carries two feet, each pulled toward a target hanging from
//! the hip by a PD spring, and a one-joint arm whose angle serves as the
//! posture goal. Ground exists only over the start platform and the stones
//! named by the plan (unless `gaps` is off); a foot that drops into a gap
//! counts as a fall.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::randomization::{apply_horizontal_push, DynamicsSample, PushTimer, RandomizationConfig};
use super::{Environment, FrameStack, MirrorMap, Transition};
use crate::curiosity::ObsRanges;
use crate::error::{Error, Result};
use crate::rewards::{RegSignals, RegTerm, StepSignals, TaskSignals};
use crate::stage::{
    advance, evaluate_contacts, evaluate_task, wrap_angle, ContactRequirement, Frame, ObservedContact, Pose2,
    PostureReading, Region, StagePlan, StageStatus, TaskGoal, TaskSnapshot,
};

pub const EFFECTORS: [&str; 2] = ["left_foot", "right_foot"];
pub const ACT_DIM: usize = 5;
const HISTORY: usize = 3;
const FRAME_DIM: usize = 3 * ACT_DIM;
const BASE_DIM: usize = 5;
const GOAL_DIM: usize = 16;
const POSTURE_DIM: usize = 4;
pub const OBS_DIM: usize = HISTORY * FRAME_DIM + BASE_DIM + GOAL_DIM + POSTURE_DIM;
pub const CURIOSITY_DIM: usize = 12;
/// Height of the arm pivot above the body center.
const SHOULDER: [f64; 2] = [0.0, 0.05];
const GRAVEL_CELL: f64 = 0.1;

const REG_TERMS: &[RegTerm] = &[
    RegTerm::DofAcceleration,
    RegTerm::DofVelocities,
    RegTerm::ActionRate,
    RegTerm::Termination,
    RegTerm::Slippage,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopperConfig {
    pub body_mass: f64,
    pub body_inertia: f64,
    pub foot_mass: f64,
    /// Hip position in the body frame.
    pub hip: [f64; 2],
    /// Nominal foot depth below the hip.
    pub leg_length: f64,
    /// Foot target excursion per unit action (forward, vertical).
    pub reach: [f64; 2],
    pub leg_kp: f64,
    pub leg_kd: f64,
    pub arm_inertia: f64,
    pub arm_kp: f64,
    pub arm_kd: f64,
    pub arm_range: f64,
    pub arm_length: f64,
    /// Normal spring and damper per sole point.
    pub ground_stiffness: f64,
    pub ground_damping: f64,
    /// Tangential stick spring and damper per sole point, clamped by
    /// Coulomb friction.
    pub ground_tangential_stiffness: f64,
    pub ground_viscous: f64,
    /// Half length of each foot sole (heel and toe contact points).
    pub sole_half_length: f64,
    pub friction: f64,
    pub body_half_extents: [f64; 2],
    /// Tilt beyond which the torso counts as fallen.
    pub max_tilt: f64,
    pub gravity: f64,
    pub control_dt: f64,
    pub substeps: usize,
    pub episode_steps: usize,
    /// A foot this close above the surface counts as touching it.
    pub contact_slack: f64,
    /// Remove the ground between stones.
    pub gaps: bool,
    /// Start platform extent along x.
    pub platform: [f64; 2],
    /// Depth below which an unsupported foot has fallen.
    pub gap_depth: f64,
    /// Penetration beyond which a foot is inside a stone's side, not on top.
    pub capture_depth: f64,
    /// Amplitude of random ground-height cells; 0 disables.
    pub gravel: f64,
    pub init_noise: f64,
    /// End the episode (as a bootstrapped truncation) once the plan is done.
    pub end_on_complete: bool,
}

impl Default for HopperConfig {
    fn default() -> Self {
        Self {
            body_mass: 4.0,
            body_inertia: 0.06,
            foot_mass: 0.2,
            hip: [0.0, -0.05],
            leg_length: 0.32,
            reach: [0.2, 0.12],
            leg_kp: 600.0,
            leg_kd: 12.0,
            arm_inertia: 0.01,
            arm_kp: 3.0,
            arm_kd: 0.15,
            arm_range: 1.5,
            arm_length: 0.25,
            ground_stiffness: 5000.0,
            ground_damping: 20.0,
            ground_tangential_stiffness: 3000.0,
            ground_viscous: 10.0,
            sole_half_length: 0.06,
            friction: 0.8,
            body_half_extents: [0.15, 0.05],
            max_tilt: 1.0,
            gravity: 9.81,
            control_dt: 0.02,
            substeps: 4,
            episode_steps: 300,
            contact_slack: 0.002,
            gaps: true,
            platform: [-0.3, 0.3],
            gap_depth: 0.1,
            capture_depth: 0.03,
            gravel: 0.0,
            init_noise: 1.0,
            end_on_complete: true,
        }
    }
}

impl HopperConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_mass", self.body_mass),
            ("body_inertia", self.body_inertia),
            ("foot_mass", self.foot_mass),
            ("arm_inertia", self.arm_inertia),
            ("control_dt", self.control_dt),
            ("gravity", self.gravity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("hopper `{name}` must be positive")));
            }
        }
        if self.substeps == 0 || self.episode_steps == 0 {
            return Err(Error::config("hopper substeps and episode_steps must be >= 1"));
        }
        if self.platform[0] >= self.platform[1] {
            return Err(Error::config("hopper platform must have positive length"));
        }
        Ok(())
    }
}

/// Physical state; the arm angle is absolute (world frame).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HopperState {
    pub body_pos: [f64; 2],
    pub body_angle: f64,
    pub body_vel: [f64; 2],
    pub body_omega: f64,
    pub feet_pos: [[f64; 2]; 2],
    pub feet_vel: [[f64; 2]; 2],
    pub arm_angle: f64,
    pub arm_omega: f64,
    /// Stick anchors (x) of each foot's heel and toe while in contact.
    pub stick: [[Option<f64>; 2]; 2],
}

impl HopperState {
    pub const COLUMNS: [&'static str; 16] = [
        "x", "z", "pitch", "vx", "vz", "omega", "left_x", "left_z", "right_x", "right_z", "left_vx", "left_vz",
        "right_vx", "right_vz", "arm", "arm_omega",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        let s = self;
        vec![
            s.body_pos[0],
            s.body_pos[1],
            s.body_angle,
            s.body_vel[0],
            s.body_vel[1],
            s.body_omega,
            s.feet_pos[0][0],
            s.feet_pos[0][1],
            s.feet_pos[1][0],
            s.feet_pos[1][1],
            s.feet_vel[0][0],
            s.feet_vel[0][1],
            s.feet_vel[1][0],
            s.feet_vel[1][1],
            s.arm_angle,
            s.arm_omega,
        ]
    }

    pub fn mirrored(&self) -> Self {
        let mut m = *self;
        m.feet_pos.swap(0, 1);
        m.feet_vel.swap(0, 1);
        m.stick.swap(0, 1);
        m
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    fn pose(&self) -> Pose2 {
        Pose2::new(self.body_pos[0], self.body_pos[1], self.body_angle)
    }
}

fn rotate(angle: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Rigid-body integrator with ground, independent of stages and rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct HopperWorld {
    pub config: HopperConfig,
    pub dynamics: DynamicsSample,
    pub state: HopperState,
    /// Foot targets (hip offset plus a gravity-aligned leg vector).
    pub targets: [[f64; 2]; 2],
    pub arm_target: f64,
    /// Supported x-intervals; empty means flat ground everywhere.
    support: Vec<[f64; 2]>,
    gravel: Vec<f64>,
    gravel_origin: f64,
}

impl HopperWorld {
    pub fn new(config: HopperConfig, support: Vec<[f64; 2]>) -> Self {
        let dynamics = DynamicsSample::nominal(config.friction);
        let mut w = Self {
            config,
            dynamics,
            state: HopperState::default(),
            targets: [[0.0; 2]; 2],
            arm_target: 0.0,
            support,
            gravel: Vec::new(),
            gravel_origin: 0.0,
        };
        w.targets = [w.nominal_target(), w.nominal_target()];
        w
    }

    fn nominal_target(&self) -> [f64; 2] {
        [self.config.hip[0], self.config.hip[1] - self.config.leg_length]
    }

    /// Map a clamped action onto foot targets and the arm target.
    pub fn set_command(&mut self, a: &[f64; ACT_DIM]) {
        let n = self.nominal_target();
        let r = self.config.reach;
        self.targets = [
            [n[0] + r[0] * a[0], n[1] + r[1] * a[1]],
            [n[0] + r[0] * a[2], n[1] + r[1] * a[3]],
        ];
        self.arm_target = self.config.arm_range * a[4];
    }

    pub fn supported(&self, x: f64) -> bool {
        self.support.is_empty() || self.support.iter().any(|s| x >= s[0] && x <= s[1])
    }

    pub fn ground_height(&self, x: f64) -> f64 {
        if self.gravel.is_empty() {
            return 0.0;
        }
        let idx = ((x - self.gravel_origin) / GRAVEL_CELL).floor();
        if idx < 0.0 || idx as usize >= self.gravel.len() {
            0.0
        } else {
            self.gravel[idx as usize]
        }
    }

    fn roughen(&mut self, rng: &mut ChaCha8Rng) {
        self.gravel.clear();
        if self.config.gravel > 0.0 {
            let lo = self.support.iter().map(|s| s[0]).fold(self.config.platform[0], f64::min) - 1.0;
            let hi = self.support.iter().map(|s| s[1]).fold(self.config.platform[1], f64::max) + 1.0;
            self.gravel_origin = lo;
            let cells = ((hi - lo) / GRAVEL_CELL).ceil() as usize;
            let a = self.config.gravel;
            self.gravel = (0..cells).map(|_| rng.random_range(-a..=a)).collect();
        }
    }

    /// Heel and toe positions and velocities of a foot; soles stay aligned
    /// with the torso.
    fn sole_points(&self, i: usize) -> [([f64; 2], [f64; 2]); 2] {
        let st = &self.state;
        let h = self.config.sole_half_length;
        [-h, h].map(|dx| {
            let r = rotate(st.body_angle, [dx, 0.0]);
            (
                [st.feet_pos[i][0] + r[0], st.feet_pos[i][1] + r[1]],
                [st.feet_vel[i][0] - st.body_omega * r[1], st.feet_vel[i][1] + st.body_omega * r[0]],
            )
        })
    }

    /// Penetration depth of a point, or `None` when no ground pushes back.
    fn penetration(&self, p: [f64; 2]) -> Option<f64> {
        if !self.supported(p[0]) {
            return None;
        }
        let d = self.ground_height(p[0]) - p[1];
        (d > 0.0 && d < self.config.capture_depth).then_some(d)
    }

    pub fn foot_touching(&self, i: usize) -> bool {
        self.sole_points(i).iter().any(|(p, _)| {
            self.supported(p[0]) && {
                let gap = p[1] - self.ground_height(p[0]);
                gap <= self.config.contact_slack && -gap < self.config.capture_depth
            }
        })
    }

    /// Ground force on a foot and its torque about the foot center, updating
    /// the stick anchors.
    fn ground_force(&mut self, i: usize) -> ([f64; 2], f64) {
        let c = &self.config;
        let mut force = [0.0; 2];
        let mut torque = 0.0;
        for (j, (p, v)) in self.sole_points(i).into_iter().enumerate() {
            let Some(d) = self.penetration(p) else {
                self.state.stick[i][j] = None;
                continue;
            };
            let normal = (c.ground_stiffness * d - c.ground_damping * v[1]).max(0.0);
            let limit = self.dynamics.friction * normal;
            let anchor = *self.state.stick[i][j].get_or_insert(p[0]);
            let mut tangential = -c.ground_tangential_stiffness * (p[0] - anchor) - c.ground_viscous * v[0];
            if tangential.abs() > limit {
                tangential = tangential.clamp(-limit, limit);
                self.state.stick[i][j] = Some(p[0] + tangential / c.ground_tangential_stiffness);
            }
            let r = [p[0] - self.state.feet_pos[i][0], p[1] - self.state.feet_pos[i][1]];
            force = [force[0] + tangential, force[1] + normal];
            torque += r[0] * normal - r[1] * tangential;
        }
        (force, torque)
    }

    fn masses(&self) -> (f64, f64, f64, f64) {
        let s = self.dynamics.mass_scale;
        let c = &self.config;
        (c.body_mass * s, c.body_inertia * s, c.foot_mass * s, c.arm_inertia * s)
    }

    /// Leg spring force acting on each foot and the torque its reaction
    /// applies to the body.
    /// World position and velocity of foot `i`'s target, and the hip lever
    /// arm. Legs hang from the hip in the gravity-aligned frame, so the leg
    /// force acts on the torso at the hip.
    fn leg_anchor(&self, i: usize) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let st = &self.state;
        let hip = self.config.hip;
        let lever = rotate(st.body_angle, hip);
        let offset = [self.targets[i][0] - hip[0], self.targets[i][1] - hip[1]];
        let point = [st.body_pos[0] + lever[0] + offset[0], st.body_pos[1] + lever[1] + offset[1]];
        let vel = [st.body_vel[0] - st.body_omega * lever[1], st.body_vel[1] + st.body_omega * lever[0]];
        (point, vel, lever)
    }

    fn leg_forces(&self) -> [([f64; 2], f64); 2] {
        let st = &self.state;
        let kp = self.config.leg_kp * self.dynamics.kp_scale;
        let kd = self.config.leg_kd * self.dynamics.kd_scale;
        let mut out = [([0.0; 2], 0.0); 2];
        for (i, slot) in out.iter_mut().enumerate() {
            let (target, target_vel, lever) = self.leg_anchor(i);
            let f = [
                kp * (target[0] - st.feet_pos[i][0]) + kd * (target_vel[0] - st.feet_vel[i][0]),
                kp * (target[1] - st.feet_pos[i][1]) + kd * (target_vel[1] - st.feet_vel[i][1]),
            ];
            // Reaction -f applied at the hip.
            let torque = -(lever[0] * f[1] - lever[1] * f[0]);
            *slot = (f, torque);
        }
        out
    }

    fn arm_torque(&self) -> f64 {
        let st = &self.state;
        let kp = self.config.arm_kp * self.dynamics.kp_scale;
        let kd = self.config.arm_kd * self.dynamics.kd_scale;
        let joint = st.arm_angle - st.body_angle;
        let joint_vel = st.arm_omega - st.body_omega;
        kp * (self.arm_target - joint) - kd * joint_vel
    }

    /// One semi-implicit Euler substep.
    pub fn substep(&mut self) {
        let dt = self.config.control_dt / self.config.substeps as f64;
        let g = self.config.gravity;
        let (m_b, i_b, m_f, i_a) = self.masses();
        let legs = self.leg_forces();
        let tau_arm = self.arm_torque();
        let mut foot_acc = [[0.0; 2]; 2];
        let mut sole_torque = [0.0; 2];
        for i in 0..2 {
            let (fg, tg) = self.ground_force(i);
            foot_acc[i] = [(legs[i].0[0] + fg[0]) / m_f, (legs[i].0[1] + fg[1]) / m_f - g];
            sole_torque[i] = tg;
        }
        let leg_sum = [legs[0].0[0] + legs[1].0[0], legs[0].0[1] + legs[1].0[1]];
        // Soles are rigidly aligned with the torso, so their ground torque
        // acts on it directly.
        let torque_sum = (legs[0].1 + legs[1].1) + (sole_torque[0] + sole_torque[1]);
        let body_acc = [-leg_sum[0] / m_b, -leg_sum[1] / m_b - g];
        let body_alpha = (torque_sum - tau_arm) / i_b;
        let arm_alpha = tau_arm / i_a;

        let st = &mut self.state;
        for k in 0..2 {
            st.body_vel[k] += body_acc[k] * dt;
            st.body_pos[k] += st.body_vel[k] * dt;
        }
        st.body_omega += body_alpha * dt;
        st.body_angle += st.body_omega * dt;
        st.arm_omega += arm_alpha * dt;
        st.arm_angle += st.arm_omega * dt;
        for i in 0..2 {
            for k in 0..2 {
                st.feet_vel[i][k] += foot_acc[i][k] * dt;
                st.feet_pos[i][k] += st.feet_vel[i][k] * dt;
            }
        }
    }

    /// Kinetic plus gravitational plus spring energy.
    pub fn energy(&self) -> f64 {
        let (m_b, i_b, m_f, i_a) = self.masses();
        let g = self.config.gravity;
        let st = &self.state;
        let sq = |v: [f64; 2]| v[0] * v[0] + v[1] * v[1];
        let mut e = 0.5 * m_b * sq(st.body_vel) + 0.5 * i_b * st.body_omega.powi(2) + 0.5 * i_a * st.arm_omega.powi(2);
        e += m_b * g * st.body_pos[1];
        let kp = self.config.leg_kp * self.dynamics.kp_scale;
        for i in 0..2 {
            e += 0.5 * m_f * sq(st.feet_vel[i]) + m_f * g * st.feet_pos[i][1];
            let (target, _, _) = self.leg_anchor(i);
            let d = [target[0] - st.feet_pos[i][0], target[1] - st.feet_pos[i][1]];
            e += 0.5 * kp * sq(d);
        }
        let joint = st.arm_angle - st.body_angle;
        e += 0.5 * self.config.arm_kp * self.dynamics.kp_scale * (self.arm_target - joint).powi(2);
        e
    }

    /// Torso touching the ground, tipped over, or a foot lost in a gap.
    pub fn fallen(&self) -> bool {
        let st = &self.state;
        let [hx, hz] = self.config.body_half_extents;
        let corner_down = [[hx, hz], [hx, -hz], [-hx, hz], [-hx, -hz]]
            .iter()
            .any(|&c| st.body_pos[1] + rotate(st.body_angle, c)[1] <= 0.0);
        let lost_foot = st.feet_pos.iter().any(|p| p[1] < -self.config.gap_depth);
        corner_down || lost_foot || st.body_angle.abs() > self.config.max_tilt
    }

    /// Joint positions: foot offsets from their nominal targets (hip frame,
    /// gravity aligned) and the arm joint angle.
    pub fn joint_positions(&self) -> [f64; ACT_DIM] {
        let st = &self.state;
        let n = self.nominal_target();
        let hip = self.config.hip;
        let lever = rotate(st.body_angle, hip);
        let mut out = [0.0; ACT_DIM];
        for i in 0..2 {
            out[2 * i] = st.feet_pos[i][0] - st.body_pos[0] - lever[0] - (n[0] - hip[0]);
            out[2 * i + 1] = st.feet_pos[i][1] - st.body_pos[1] - lever[1] - (n[1] - hip[1]);
        }
        out[4] = st.arm_angle - st.body_angle;
        out
    }

    pub fn joint_velocities(&self) -> [f64; ACT_DIM] {
        let st = &self.state;
        let lever = rotate(st.body_angle, self.config.hip);
        let hip_vel = [st.body_vel[0] - st.body_omega * lever[1], st.body_vel[1] + st.body_omega * lever[0]];
        let mut out = [0.0; ACT_DIM];
        for i in 0..2 {
            out[2 * i] = st.feet_vel[i][0] - hip_vel[0];
            out[2 * i + 1] = st.feet_vel[i][1] - hip_vel[1];
        }
        out[4] = st.arm_omega - st.body_omega;
        out
    }
}

/// Stones named by a plan: distinct world-frame contact regions.
pub fn plan_stones(plan: &StagePlan) -> Result<Vec<Region>> {
    let mut stones: Vec<Region> = Vec::new();
    for stage in &plan.stages {
        for req in stage.contacts.values() {
            if let ContactRequirement::InContactWithin { region } = req {
                if region.frame == Frame::World && !stones.contains(region) {
                    stones.push(*region);
                }
            }
        }
    }
    for (i, a) in stones.iter().enumerate() {
        for b in &stones[i + 1..] {
            if a.overlaps(b) {
                return Err(Error::config(format!(
                    "stones {:?}..{:?} and {:?}..{:?} overlap",
                    a.lo, a.hi, b.lo, b.hi
                )));
            }
        }
    }
    Ok(stones)
}

fn check_plan(plan: &StagePlan) -> Result<()> {
    plan.validate()?;
    for name in plan.effectors() {
        if !EFFECTORS.contains(&name.as_str()) {
            return Err(Error::config(format!("hopper has no end effector `{name}`")));
        }
    }
    for stage in &plan.stages {
        if matches!(stage.task, TaskGoal::Transport { .. }) {
            return Err(Error::config("hopper stages cannot carry a transport goal"));
        }
    }
    Ok(())
}

pub struct HopperEnv {
    config: HopperConfig,
    plan: StagePlan,
    randomization: Option<RandomizationConfig>,
    world: HopperWorld,
    stones: Vec<Region>,
    status: StageStatus,
    history: FrameStack,
    last_cmd: [f64; ACT_DIM],
    pending: VecDeque<[f64; ACT_DIM]>,
    last_joint_vel: [f64; ACT_DIM],
    push: PushTimer,
    rng: ChaCha8Rng,
    steps: usize,
    obs_mirror: MirrorMap,
    act_mirror: MirrorMap,
    curiosity_mirror: MirrorMap,
}

impl HopperEnv {
    pub fn new(config: HopperConfig, plan: StagePlan) -> Result<Self> {
        config.validate()?;
        check_plan(&plan)?;
        let stones = plan_stones(&plan)?;
        let mut support: Vec<[f64; 2]> = Vec::new();
        if config.gaps {
            support.push(config.platform);
            support.extend(stones.iter().map(|s| [s.lo[0], s.hi[0]]));
        }
        let world = HopperWorld::new(config.clone(), support);

        let joint = MirrorMap::new(vec![2, 3, 0, 1, 4], vec![1.0; 5])?;
        let frame = joint.repeat(3);
        let goal_perm: Vec<usize> = (0..GOAL_DIM).map(|i| (i + GOAL_DIM / 2) % GOAL_DIM).collect();
        let obs_mirror = MirrorMap::concat(&[
            frame.repeat(HISTORY),
            MirrorMap::identity(BASE_DIM),
            MirrorMap::new(goal_perm, vec![1.0; GOAL_DIM])?,
            MirrorMap::identity(POSTURE_DIM),
        ]);
        let curiosity_mirror = MirrorMap::new(vec![0, 1, 2, 3, 4, 5, 8, 9, 6, 7, 11, 10], vec![1.0; CURIOSITY_DIM])?;

        let mut env = Self {
            config,
            plan,
            randomization: None,
            world,
            stones,
            status: StageStatus::default(),
            history: FrameStack::new(HISTORY),
            last_cmd: [0.0; ACT_DIM],
            pending: VecDeque::new(),
            last_joint_vel: [0.0; ACT_DIM],
            push: PushTimer::new(None),
            rng: ChaCha8Rng::seed_from_u64(0),
            steps: 0,
            obs_mirror,
            act_mirror: joint,
            curiosity_mirror,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn world(&self) -> &HopperWorld {
        &self.world
    }

    pub fn stones(&self) -> &[Region] {
        &self.stones
    }

    /// Replace the physical state (used by tests and demos).
    pub fn set_state(&mut self, state: HopperState) {
        self.world.state = state;
        self.last_joint_vel = self.world.joint_velocities();
        self.history.reset(self.frame());
    }

    /// The same episode with left and right exchanged everywhere.
    pub fn mirrored(&self) -> Result<Self> {
        let mut plan = self.plan.clone();
        for stage in &mut plan.stages {
            let l = stage.contacts.remove(EFFECTORS[0]);
            let r = stage.contacts.remove(EFFECTORS[1]);
            if let Some(r) = r {
                stage.contacts.insert(EFFECTORS[0].into(), r);
            }
            if let Some(l) = l {
                stage.contacts.insert(EFFECTORS[1].into(), l);
            }
        }
        let mut m = HopperEnv::new(self.config.clone(), plan)?;
        m.randomization = self.randomization.clone();
        m.world.dynamics = self.world.dynamics;
        m.world.gravel = self.world.gravel.clone();
        m.world.gravel_origin = self.world.gravel_origin;
        m.world.state = self.world.state.mirrored();
        m.world.targets = [self.world.targets[1], self.world.targets[0]];
        m.world.arm_target = self.world.arm_target;
        m.status = self.status;
        m.history = self.history.clone();
        let act = self.act_mirror.clone();
        m.history.map_frames(|f| MirrorMap::concat(&[act.clone(), act.clone(), act.clone()]).apply(f));
        m.last_cmd = mirror_cmd(&self.last_cmd);
        m.pending = self.pending.iter().map(mirror_cmd).collect();
        m.last_joint_vel = mirror_cmd(&self.last_joint_vel);
        m.push = self.push;
        m.rng = self.rng.clone();
        m.steps = self.steps;
        Ok(m)
    }

    fn frame(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(FRAME_DIM);
        f.extend_from_slice(&self.world.joint_positions());
        f.extend_from_slice(&self.world.joint_velocities());
        f.extend_from_slice(&self.last_cmd);
        f
    }

    fn observation(&self) -> Vec<f64> {
        let st = &self.world.state;
        let pose = st.pose();
        let mut o = self.history.flatten();
        let v = rotate(-st.body_angle, st.body_vel);
        let gravity = rotate(-st.body_angle, [0.0, -1.0]);
        o.extend_from_slice(&[v[0], v[1], st.body_omega, gravity[0], gravity[1]]);
        let n = self.status.n_stage;
        for eff in EFFECTORS {
            for k in [n, n + 1] {
                match self.plan.stage(k).contacts.get(eff) {
                    Some(ContactRequirement::InContactWithin { region }) => {
                        let (lo, hi) = match region.frame {
                            Frame::World => (pose.to_local(region.lo), pose.to_local(region.hi)),
                            Frame::Body => (region.lo, region.hi),
                        };
                        o.extend_from_slice(&[lo[0], lo[1], hi[0], hi[1]]);
                    }
                    _ => o.extend_from_slice(&[0.0; 4]),
                }
            }
        }
        for k in [n, n + 1] {
            match self.plan.stage(k).task {
                TaskGoal::Posture { angle, .. } => o.extend_from_slice(&[angle, 1.0]),
                _ => o.extend_from_slice(&[0.0, 0.0]),
            }
        }
        debug_assert_eq!(o.len(), OBS_DIM);
        o
    }

    fn curiosity_obs(&self, touching: [bool; 2]) -> Vec<f64> {
        let s = &self.world.state;
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        vec![
            s.body_pos[0],
            s.body_pos[1],
            s.body_angle,
            s.body_vel[0],
            s.body_vel[1],
            s.body_omega,
            s.feet_pos[0][0],
            s.feet_pos[0][1],
            s.feet_pos[1][0],
            s.feet_pos[1][1],
            b(touching[0]),
            b(touching[1]),
        ]
    }

    fn posture_reading(&self) -> PostureReading {
        let st = &self.world.state;
        let joint = st.arm_angle - st.body_angle;
        let l = self.config.arm_length;
        PostureReading {
            angle: joint,
            position: [SHOULDER[0] + l * joint.cos(), SHOULDER[1] + l * joint.sin()],
        }
    }

    fn fault(&mut self, msg: String) -> Transition {
        let status = self.status;
        Transition {
            obs: self.observation(),
            signals: StepSignals {
                status,
                reg: RegSignals {
                    terminated: Some(true),
                    ..self.zero_reg()
                },
                task: TaskSignals::None,
            },
            curiosity_obs: vec![0.0; CURIOSITY_DIM],
            curiosity_obs_mirrored: vec![0.0; CURIOSITY_DIM],
            terminated: true,
            truncated: false,
            success: false,
            fault: Some(msg),
        }
    }

    fn zero_reg(&self) -> RegSignals {
        RegSignals {
            dof_acc: Some(vec![0.0; ACT_DIM]),
            dof_vel: Some(vec![0.0; ACT_DIM]),
            action_delta: Some(vec![0.0; ACT_DIM]),
            terminated: Some(false),
            foot_slip: Some(vec![(0.0, false); 2]),
            foot_contact: Some(vec![false; 2]),
            ..Default::default()
        }
    }

    /// Command difference expressed in joint units.
    fn joint_delta(&self, a: &[f64; ACT_DIM], b: &[f64; ACT_DIM]) -> Vec<f64> {
        let r = self.config.reach;
        let scale = [r[0], r[1], r[0], r[1], self.config.arm_range];
        (0..ACT_DIM).map(|i| scale[i] * (a[i] - b[i])).collect()
    }
}

fn mirror_cmd(a: &[f64; ACT_DIM]) -> [f64; ACT_DIM] {
    [a[2], a[3], a[0], a[1], a[4]]
}

impl Environment for HopperEnv {
    fn name(&self) -> &'static str {
        "hopper"
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn act_dim(&self) -> usize {
        ACT_DIM
    }

    fn plan(&self) -> &StagePlan {
        &self.plan
    }

    fn status(&self) -> StageStatus {
        self.status
    }

    fn set_randomization(&mut self, config: Option<RandomizationConfig>) {
        self.randomization = config;
    }

    fn dynamics(&self) -> DynamicsSample {
        self.world.dynamics
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &self.config;
        self.world.dynamics = match &self.randomization {
            Some(r) => r.sample(&mut rng, c.control_dt),
            None => DynamicsSample::nominal(c.friction),
        };
        self.world.roughen(&mut rng);
        let noise = c.init_noise;
        let mut u = |scale: f64| -> f64 {
            if noise == 0.0 {
                0.0
            } else {
                rng.random_range(-1.0..=1.0) * scale * noise
            }
        };
        let angle = u(0.02);
        let body = [u(0.02), c.hip[1].abs() + c.leg_length - 0.03 + u(0.005)];
        let arm = u(0.05);
        let mut feet = [[0.0; 2]; 2];
        for f in feet.iter_mut() {
            *f = [body[0] + c.hip[0] + u(0.01), 0.0];
        }
        self.world.state = HopperState {
            body_pos: body,
            body_angle: angle,
            body_vel: [0.0; 2],
            body_omega: 0.0,
            feet_pos: feet,
            feet_vel: [[0.0; 2]; 2],
            arm_angle: angle + arm,
            arm_omega: 0.0,
            stick: Default::default(),
        };
        self.rng = rng;
        self.world.set_command(&[0.0; ACT_DIM]);
        self.status = StageStatus::default();
        self.last_cmd = [0.0; ACT_DIM];
        self.pending = std::iter::repeat_n([0.0; ACT_DIM], self.world.dynamics.delay_steps).collect();
        self.last_joint_vel = self.world.joint_velocities();
        self.push = PushTimer::new(self.world.dynamics.push_interval_steps);
        self.steps = 0;
        self.history.reset(self.frame());
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        if action.len() != ACT_DIM {
            return self.fault(format!("hopper expects {ACT_DIM} action components, got {}", action.len()));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return self.fault("non-finite action".into());
        }
        let mut cmd = [0.0; ACT_DIM];
        for (c, a) in cmd.iter_mut().zip(action) {
            *c = a.clamp(-1.0, 1.0);
        }
        self.pending.push_back(cmd);
        let applied = self.pending.pop_front().unwrap_or(cmd);
        self.world.set_command(&applied);
        for _ in 0..self.config.substeps {
            self.world.substep();
        }
        if self.push.tick() {
            let dv = self.world.dynamics.push_dv;
            let vx = self.world.state.body_vel[0];
            self.world.state.body_vel[0] = apply_horizontal_push(vx, dv, &mut self.rng);
        }
        self.steps += 1;

        if !self.world.state.is_finite() {
            return self.fault("non-finite hopper state".into());
        }

        let st = self.world.state;
        let pose = st.pose();
        let touching = [self.world.foot_touching(0), self.world.foot_touching(1)];
        let observed: Vec<(&str, ObservedContact)> = (0..2)
            .map(|i| {
                (
                    EFFECTORS[i],
                    ObservedContact {
                        in_contact: touching[i],
                        position: st.feet_pos[i],
                    },
                )
            })
            .collect();
        let stage = self.plan.stage(self.status.n_stage).clone();
        let snapshot = TaskSnapshot {
            posture: Some(self.posture_reading()),
            object_to_destination: None,
        };
        // The plan was validated against this world's effectors and goals.
        let eval = evaluate_contacts(&observed, &stage.contact_goal(), &pose).expect("validated plan");
        let f_task = evaluate_task(&snapshot, &stage.task).expect("validated plan");
        let mut status = advance(self.status, eval.fulfilled, f_task, &self.plan);
        status.n_corr = eval.n_corr;
        status.n_wrong = eval.n_wrong;
        self.status = status;

        let fell = self.world.fallen();
        let success = status.plan_complete;
        let truncated = !fell && (self.steps >= self.config.episode_steps || (success && self.config.end_on_complete));

        let joint_vel = self.world.joint_velocities();
        let dt = self.config.control_dt;
        let reg = RegSignals {
            dof_acc: Some((0..ACT_DIM).map(|i| (joint_vel[i] - self.last_joint_vel[i]) / dt).collect()),
            dof_vel: Some(joint_vel.to_vec()),
            action_delta: Some(self.joint_delta(&cmd, &self.last_cmd)),
            terminated: Some(fell),
            foot_slip: Some((0..2).map(|i| (st.feet_vel[i][0].hypot(st.feet_vel[i][1]), touching[i])).collect()),
            foot_contact: Some(touching.to_vec()),
            ..Default::default()
        };
        let task = match self.plan.stage(status.n_stage).task {
            TaskGoal::Posture { angle, position, .. } => {
                let reading = self.posture_reading();
                let err_pos = position.map_or(0.0, |p| {
                    (reading.position[0] - p[0]).hypot(reading.position[1] - p[1])
                });
                TaskSignals::Posture {
                    err_rot: wrap_angle(reading.angle - angle),
                    err_pos,
                }
            }
            _ => TaskSignals::None,
        };
        self.last_joint_vel = joint_vel;
        self.last_cmd = cmd;
        self.history.push(self.frame());
        let curiosity_obs = self.curiosity_obs(touching);
        let curiosity_obs_mirrored = self.curiosity_mirror.apply(&curiosity_obs);
        Transition {
            obs: self.observation(),
            signals: StepSignals { status, reg, task },
            curiosity_obs,
            curiosity_obs_mirrored,
            terminated: fell,
            truncated,
            success,
            fault: None,
        }
    }

    fn mirror_obs(&self, obs: &[f64]) -> Vec<f64> {
        self.obs_mirror.apply(obs)
    }

    fn mirror_act(&self, act: &[f64]) -> Vec<f64> {
        self.act_mirror.apply(act)
    }

    fn curiosity_ranges(&self) -> ObsRanges {
        let c = &self.config;
        let x_lo = self.stones.iter().map(|s| s.lo[0]).fold(c.platform[0], f64::min) - 0.5;
        let x_hi = self.stones.iter().map(|s| s.hi[0]).fold(c.platform[1], f64::max) + 0.5;
        let lo = vec![x_lo, 0.0, -PI, -3.0, -3.0, -10.0, x_lo, -0.1, x_lo, -0.1, 0.0, 0.0];
        let hi = vec![x_hi, 1.0, PI, 3.0, 3.0, 10.0, x_hi, 0.6, x_hi, 0.6, 1.0, 1.0];
        ObsRanges::new(lo, hi).expect("static ranges are well formed")
    }

    fn reg_terms(&self) -> &'static [RegTerm] {
        REG_TERMS
    }

    fn state_columns(&self) -> Vec<String> {
        HopperState::COLUMNS.iter().map(|s| s.to_string()).collect()
    }

    fn state_row(&self) -> Vec<f64> {
        self.world.state.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stage::Stage;
    use std::collections::BTreeMap;

    fn stone(x0: f64, x1: f64) -> ContactRequirement {
        ContactRequirement::InContactWithin {
            region: Region::world([x0, -0.05], [x1, 0.05]),
        }
    }

    fn course() -> StagePlan {
        let double = |x0, x1| Stage {
            contacts: BTreeMap::from([("left_foot".into(), stone(x0, x1)), ("right_foot".into(), stone(x0, x1))]),
            task: TaskGoal::AlwaysFulfilled,
        };
        let left = Stage {
            contacts: BTreeMap::from([
                ("left_foot".into(), stone(0.9, 1.2)),
                ("right_foot".into(), ContactRequirement::Airborne),
            ]),
            task: TaskGoal::posture(0.8),
        };
        StagePlan::new(vec![double(0.45, 0.75), left], 5).unwrap()
    }

    #[test]
    fn same_seed_same_observations() {
        let mut a = HopperEnv::new(HopperConfig::default(), course()).unwrap();
        let mut b = HopperEnv::new(HopperConfig::default(), course()).unwrap();
        assert_eq!(a.reset(7), b.reset(7));
        for k in 0..50 {
            let act: Vec<f64> = (0..ACT_DIM).map(|i| ((k * 7 + i * 3) as f64).sin()).collect();
            assert_eq!(a.step(&act), b.step(&act));
        }
        assert_ne!(a.reset(7), a.reset(8));
    }

    #[test]
    fn history_starts_as_three_copies() {
        let mut env = HopperEnv::new(HopperConfig::default(), course()).unwrap();
        let o = env.reset(3);
        assert_eq!(o.len(), OBS_DIM);
        assert_eq!(o[0..FRAME_DIM], o[FRAME_DIM..2 * FRAME_DIM]);
        assert_eq!(o[0..FRAME_DIM], o[2 * FRAME_DIM..3 * FRAME_DIM]);
    }

    #[test]
    fn zero_action_stays_near_rest() {
        let stand = Stage {
            contacts: BTreeMap::from([("left_foot".into(), stone(-0.3, 0.3)), ("right_foot".into(), stone(-0.3, 0.3))]),
            task: TaskGoal::AlwaysFulfilled,
        };
        let config = HopperConfig {
            end_on_complete: false,
            ..Default::default()
        };
        let mut env = HopperEnv::new(config, StagePlan::new(vec![stand], 5).unwrap()).unwrap();
        env.reset(1);
        let start = env.world().state;
        for _ in 0..250 {
            let t = env.step(&[0.0; ACT_DIM]);
            assert!(!t.terminated, "fell at rest");
            assert_eq!(t.signals.status.n_wrong, 0);
        }
        let end = env.world().state;
        assert!((end.body_pos[0] - start.body_pos[0]).abs() < 0.02);
        assert!(end.body_vel[0].abs() < 1e-3 && end.body_vel[1].abs() < 1e-3);
        assert!(end.body_angle.abs() < 0.05);
        assert!(env.world().foot_touching(0) && env.world().foot_touching(1));
    }

    #[test]
    fn overlapping_stones_are_rejected() {
        let s = |x0, x1| Stage {
            contacts: BTreeMap::from([("left_foot".into(), stone(x0, x1))]),
            task: TaskGoal::AlwaysFulfilled,
        };
        let plan = StagePlan::new(vec![s(0.4, 0.7), s(0.6, 0.9)], 5).unwrap();
        assert!(HopperEnv::new(HopperConfig::default(), plan).err().unwrap().is_config());
    }

    #[test]
    fn airborne_goal_encoding_is_zero() {
        let mut env = HopperEnv::new(HopperConfig::default(), course()).unwrap();
        env.reset(0);
        env.status.n_stage = 1;
        let o = env.observation();
        let goals = &o[HISTORY * FRAME_DIM + BASE_DIM..][..GOAL_DIM];
        // Right foot, current stage: airborne.
        assert!(goals[8..12].iter().all(|&v| v == 0.0));
        assert!(goals[0..4].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn energy_does_not_grow_without_actuation_or_contact() {
        let config = HopperConfig {
            leg_kp: 0.0,
            leg_kd: 0.0,
            arm_kp: 0.0,
            arm_kd: 0.0,
            ground_stiffness: 0.0,
            ground_damping: 0.0,
            ..Default::default()
        };
        let mut world = HopperWorld::new(config, Vec::new());
        world.state = HopperState {
            body_pos: [0.0, 1.0],
            body_angle: 0.3,
            body_vel: [0.4, 2.0],
            body_omega: 1.5,
            feet_pos: [[0.1, 0.6], [-0.1, 0.7]],
            feet_vel: [[0.2, 1.0], [-0.3, 0.5]],
            arm_angle: 0.1,
            arm_omega: -2.0,
            stick: Default::default(),
        };
        let mut e = world.energy();
        for _ in 0..1000 {
            for _ in 0..world.config.substeps {
                world.substep();
            }
            let next = world.energy();
            assert!(next <= e + 1e-9 * e.abs().max(1.0), "energy rose from {e} to {next}");
            e = next;
        }
    }
}
