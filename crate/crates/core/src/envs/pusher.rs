//! Top-down mobile base that pushes a disk to a destination.
//!
//! The base is velocity-controlled; one or two point effectors are pulled
//! toward body-frame targets by PD springs. The object moves only under
//! penalty contact forces from effectors and base, and ground friction.
//!
//! Contact regions in the plan are offsets around moving anchor points on
//! the object's back side (facing away from the destination), re-anchored
//! every step.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::randomization::{apply_push, DynamicsSample, PushTimer, RandomizationConfig};
use super::{Environment, FrameStack, MirrorMap, Transition};
use crate::curiosity::ObsRanges;
use crate::error::{Error, Result};
use crate::rewards::{RegSignals, RegTerm, StepSignals, TaskSignals, TransportInputs};
use crate::stage::{
    advance, evaluate_contacts, evaluate_task, ContactGoal, ContactRequirement, ObservedContact, Pose2, Region,
    StagePlan, StageStatus, TaskGoal, TaskSnapshot,
};

const HISTORY: usize = 3;
const BASE_CMD: usize = 3;

const REG_TERMS: &[RegTerm] = &[
    RegTerm::YawRate,
    RegTerm::DofAcceleration,
    RegTerm::DofVelocities,
    RegTerm::ActionRate,
    RegTerm::Termination,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PusherConfig {
    /// 1 (single pusher, direction gates off) or 2 (left and right hands).
    pub effectors: usize,
    pub base_mass: f64,
    pub base_inertia: f64,
    pub base_radius: f64,
    pub max_speed: f64,
    pub max_yaw_rate: f64,
    /// Velocity tracking bandwidth of the base (1/s).
    pub base_gain: f64,
    pub effector_mass: f64,
    pub effector_radius: f64,
    /// Body-frame rest position of the left effector (the right one is its mirror).
    pub effector_offset: [f64; 2],
    pub reach: f64,
    pub effector_kp: f64,
    pub effector_kd: f64,
    pub object_mass: f64,
    pub object_radius: f64,
    pub object_viscous: f64,
    pub friction: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    /// Gap within which an effector counts as touching the object.
    pub contact_slack: f64,
    /// Angle between the back direction and each side anchor (two effectors).
    pub anchor_angle: f64,
    pub object_start: [f64; 2],
    /// Destination offset from the object start: forward distance and
    /// lateral spread.
    pub destination_distance: f64,
    pub destination_spread: f64,
    pub gravity: f64,
    pub control_dt: f64,
    pub substeps: usize,
    pub episode_steps: usize,
    pub init_noise: f64,
    pub end_on_complete: bool,
}

impl Default for PusherConfig {
    fn default() -> Self {
        Self {
            effectors: 2,
            base_mass: 10.0,
            base_inertia: 0.5,
            base_radius: 0.2,
            max_speed: 0.6,
            max_yaw_rate: 1.5,
            base_gain: 8.0,
            effector_mass: 0.2,
            effector_radius: 0.03,
            effector_offset: [0.3, 0.15],
            reach: 0.15,
            effector_kp: 300.0,
            effector_kd: 8.0,
            object_mass: 2.0,
            object_radius: 0.15,
            object_viscous: 20.0,
            friction: 0.5,
            contact_stiffness: 3000.0,
            contact_damping: 20.0,
            contact_slack: 0.01,
            anchor_angle: PI / 3.0,
            object_start: [0.7, 0.0],
            destination_distance: 1.2,
            destination_spread: 0.4,
            gravity: 9.81,
            control_dt: 0.02,
            substeps: 4,
            episode_steps: 400,
            init_noise: 1.0,
            end_on_complete: true,
        }
    }
}

impl PusherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.effectors) {
            return Err(Error::config("pusher supports one or two effectors"));
        }
        for (name, v) in [
            ("base_mass", self.base_mass),
            ("base_inertia", self.base_inertia),
            ("effector_mass", self.effector_mass),
            ("object_mass", self.object_mass),
            ("object_radius", self.object_radius),
            ("control_dt", self.control_dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("pusher `{name}` must be positive")));
            }
        }
        if self.substeps == 0 || self.episode_steps == 0 {
            return Err(Error::config("pusher substeps and episode_steps must be >= 1"));
        }
        Ok(())
    }

    pub fn effector_names(&self) -> &'static [&'static str] {
        if self.effectors == 1 {
            &["hand"]
        } else {
            &["left_hand", "right_hand"]
        }
    }

    pub fn act_dim(&self) -> usize {
        BASE_CMD + 2 * self.effectors
    }

    fn frame_dim(&self) -> usize {
        4 * self.effectors + self.act_dim()
    }

    fn goal_dim(&self) -> usize {
        2 * self.effectors + 2
    }

    pub fn obs_dim(&self) -> usize {
        HISTORY * self.frame_dim() + 3 + self.goal_dim()
    }

    pub fn curiosity_dim(&self) -> usize {
        6 + 3 * self.effectors
    }

    fn rest_offsets(&self) -> Vec<[f64; 2]> {
        let [fwd, lat] = self.effector_offset;
        if self.effectors == 1 {
            vec![[fwd, 0.0]]
        } else {
            vec![[fwd, lat], [fwd, -lat]]
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PusherState {
    pub base_pos: [f64; 2],
    pub base_yaw: f64,
    pub base_vel: [f64; 2],
    pub base_omega: f64,
    pub eff_pos: Vec<[f64; 2]>,
    pub eff_vel: Vec<[f64; 2]>,
    pub object_pos: [f64; 2],
    pub object_vel: [f64; 2],
    pub destination: [f64; 2],
}

impl PusherState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![
            self.base_pos[0],
            self.base_pos[1],
            self.base_yaw,
            self.base_vel[0],
            self.base_vel[1],
            self.base_omega,
        ];
        for (p, u) in self.eff_pos.iter().zip(&self.eff_vel) {
            v.extend_from_slice(&[p[0], p[1], u[0], u[1]]);
        }
        v.extend_from_slice(&[
            self.object_pos[0],
            self.object_pos[1],
            self.object_vel[0],
            self.object_vel[1],
            self.destination[0],
            self.destination[1],
        ]);
        v
    }

    pub fn columns(n_eff: usize) -> Vec<String> {
        let mut c: Vec<String> = ["x", "y", "yaw", "vx", "vy", "omega"].iter().map(|s| s.to_string()).collect();
        for i in 0..n_eff {
            for k in ["x", "y", "vx", "vy"] {
                c.push(format!("eff{i}_{k}"));
            }
        }
        for k in ["object_x", "object_y", "object_vx", "object_vy", "dest_x", "dest_y"] {
            c.push(k.to_string());
        }
        c
    }

    /// Reflect across the x axis and exchange the effectors.
    pub fn mirrored(&self) -> Self {
        let f = |p: [f64; 2]| [p[0], -p[1]];
        Self {
            base_pos: f(self.base_pos),
            base_yaw: -self.base_yaw,
            base_vel: f(self.base_vel),
            base_omega: -self.base_omega,
            eff_pos: self.eff_pos.iter().rev().map(|&p| f(p)).collect(),
            eff_vel: self.eff_vel.iter().rev().map(|&p| f(p)).collect(),
            object_pos: f(self.object_pos),
            object_vel: f(self.object_vel),
            destination: f(self.destination),
        }
    }

    fn pose(&self) -> Pose2 {
        Pose2::new(self.base_pos[0], self.base_pos[1], self.base_yaw)
    }
}

fn rotate(angle: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Penalty force on a disk at `p` (velocity `v`) from a disk at `q` (velocity `w`).
fn disk_contact(p: [f64; 2], v: [f64; 2], q: [f64; 2], w: [f64; 2], reach: f64, k: f64, c: f64) -> [f64; 2] {
    let d = sub(p, q);
    let dist = norm(d);
    if dist >= reach || dist == 0.0 {
        return [0.0, 0.0];
    }
    let n = [d[0] / dist, d[1] / dist];
    let rel = sub(v, w);
    let mag = (k * (reach - dist) - c * (rel[0] * n[0] + rel[1] * n[1])).max(0.0);
    [mag * n[0], mag * n[1]]
}

pub struct PusherEnv {
    config: PusherConfig,
    plan: StagePlan,
    randomization: Option<RandomizationConfig>,
    dynamics: DynamicsSample,
    state: PusherState,
    targets: Vec<[f64; 2]>,
    base_cmd: [f64; 3],
    status: StageStatus,
    history: FrameStack,
    last_cmd: Vec<f64>,
    pending: VecDeque<Vec<f64>>,
    last_joint_vel: Vec<f64>,
    push: PushTimer,
    rng: ChaCha8Rng,
    steps: usize,
    frame_mirror: MirrorMap,
    obs_mirror: MirrorMap,
    act_mirror: MirrorMap,
    curiosity_mirror: MirrorMap,
}

/// Mirror map of `n` planar vectors laid out consecutively, exchanging the
/// first and last when there are two.
fn vec2_swap(n: usize) -> MirrorMap {
    let perm: Vec<usize> = (0..2 * n).map(|i| (2 * (n - 1 - i / 2)) + i % 2).collect();
    let sign = (0..2 * n).map(|i| if i % 2 == 1 { -1.0 } else { 1.0 }).collect();
    MirrorMap::new(perm, sign).expect("well-formed swap")
}

fn check_plan(config: &PusherConfig, plan: &StagePlan) -> Result<()> {
    plan.validate()?;
    for name in plan.effectors() {
        if !config.effector_names().contains(&name.as_str()) {
            return Err(Error::config(format!("pusher has no end effector `{name}`")));
        }
    }
    if plan.stages.iter().any(|s| matches!(s.task, TaskGoal::Posture { .. })) {
        return Err(Error::config("pusher stages cannot carry a posture goal"));
    }
    Ok(())
}

impl PusherEnv {
    pub fn new(config: PusherConfig, plan: StagePlan) -> Result<Self> {
        config.validate()?;
        check_plan(&config, &plan)?;
        let n = config.effectors;
        let cmd_mirror = MirrorMap::concat(&[
            MirrorMap::new(vec![0, 1, 2], vec![1.0, -1.0, -1.0])?,
            vec2_swap(n),
        ]);
        let frame_mirror = MirrorMap::concat(&[vec2_swap(n), vec2_swap(n), cmd_mirror.clone()]);
        let obs_mirror = MirrorMap::concat(&[
            frame_mirror.repeat(HISTORY),
            MirrorMap::new(vec![0, 1, 2], vec![1.0, -1.0, -1.0])?,
            vec2_swap(n),
            vec2_swap(1),
        ]);
        let flag_perm: Vec<usize> = (0..n).rev().collect();
        let curiosity_mirror = MirrorMap::concat(&[
            MirrorMap::new(vec![0, 1, 2, 3, 4, 5], vec![1.0, -1.0, -1.0, 1.0, -1.0, -1.0])?,
            vec2_swap(n),
            MirrorMap::new(flag_perm, vec![1.0; n])?,
        ]);
        let mut env = Self {
            dynamics: DynamicsSample::nominal(config.friction),
            targets: config.rest_offsets(),
            base_cmd: [0.0; 3],
            status: StageStatus::default(),
            history: FrameStack::new(HISTORY),
            last_cmd: vec![0.0; config.act_dim()],
            pending: VecDeque::new(),
            last_joint_vel: vec![0.0; 2 * n],
            push: PushTimer::new(None),
            rng: ChaCha8Rng::seed_from_u64(0),
            steps: 0,
            state: PusherState::default(),
            randomization: None,
            frame_mirror,
            obs_mirror,
            act_mirror: cmd_mirror,
            curiosity_mirror,
            config,
            plan,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn state(&self) -> &PusherState {
        &self.state
    }

    pub fn set_state(&mut self, state: PusherState) {
        self.state = state;
        self.last_joint_vel = self.joint_velocities();
        self.history.reset(self.frame());
    }

    /// The same episode reflected across the x axis.
    pub fn mirrored(&self) -> Result<Self> {
        let mut plan = self.plan.clone();
        if self.config.effectors == 2 {
            for stage in &mut plan.stages {
                let l = stage.contacts.remove("left_hand");
                let r = stage.contacts.remove("right_hand");
                if let Some(r) = r {
                    stage.contacts.insert("left_hand".into(), mirror_requirement(r));
                }
                if let Some(l) = l {
                    stage.contacts.insert("right_hand".into(), mirror_requirement(l));
                }
            }
        } else {
            for stage in &mut plan.stages {
                for req in stage.contacts.values_mut() {
                    *req = mirror_requirement(*req);
                }
            }
        }
        let mut m = PusherEnv::new(self.config.clone(), plan)?;
        m.randomization = self.randomization.clone();
        m.dynamics = self.dynamics;
        m.state = self.state.mirrored();
        m.targets = self.targets.iter().rev().map(|t| [t[0], -t[1]]).collect();
        m.base_cmd = [self.base_cmd[0], -self.base_cmd[1], -self.base_cmd[2]];
        m.status = self.status;
        m.history = self.history.clone();
        let fm = self.frame_mirror.clone();
        m.history.map_frames(|f| fm.apply(f));
        m.last_cmd = self.act_mirror.apply(&self.last_cmd);
        m.pending = self.pending.iter().map(|c| self.act_mirror.apply(c)).collect();
        m.last_joint_vel = vec2_swap(self.config.effectors).apply(&self.last_joint_vel);
        m.push = self.push;
        m.rng = self.rng.clone();
        m.steps = self.steps;
        Ok(m)
    }

    fn masses(&self) -> (f64, f64, f64, f64) {
        let s = self.dynamics.mass_scale;
        let c = &self.config;
        (c.base_mass * s, c.base_inertia * s, c.effector_mass * s, c.object_mass * s)
    }

    fn set_command(&mut self, a: &[f64]) {
        let c = &self.config;
        self.base_cmd = [a[0] * c.max_speed, a[1] * c.max_speed, a[2] * c.max_yaw_rate];
        self.targets = c
            .rest_offsets()
            .iter()
            .enumerate()
            .map(|(i, r)| [r[0] + c.reach * a[BASE_CMD + 2 * i], r[1] + c.reach * a[BASE_CMD + 2 * i + 1]])
            .collect();
    }

    pub fn substep(&mut self) {
        let c = &self.config;
        let dt = c.control_dt / c.substeps as f64;
        let (m_b, i_b, m_e, m_o) = self.masses();
        let kp = c.effector_kp * self.dynamics.kp_scale;
        let kd = c.effector_kd * self.dynamics.kd_scale;
        let gain_v = c.base_gain * self.dynamics.kp_scale;
        let gain_w = c.base_gain * self.dynamics.kd_scale;
        let st = &self.state;
        let n = c.effectors;

        let mut eff_force = vec![[0.0; 2]; n];
        let mut leg_reaction = [0.0; 2];
        let mut leg_torque = 0.0;
        let mut object_from_eff = [0.0; 2];
        for i in 0..n {
            let r = rotate(st.base_yaw, self.targets[i]);
            let target = [st.base_pos[0] + r[0], st.base_pos[1] + r[1]];
            let target_vel = [st.base_vel[0] - st.base_omega * r[1], st.base_vel[1] + st.base_omega * r[0]];
            let f = [
                kp * (target[0] - st.eff_pos[i][0]) + kd * (target_vel[0] - st.eff_vel[i][0]),
                kp * (target[1] - st.eff_pos[i][1]) + kd * (target_vel[1] - st.eff_vel[i][1]),
            ];
            let touch = disk_contact(
                st.eff_pos[i],
                st.eff_vel[i],
                st.object_pos,
                st.object_vel,
                c.object_radius + c.effector_radius,
                c.contact_stiffness,
                c.contact_damping,
            );
            eff_force[i] = [f[0] + touch[0], f[1] + touch[1]];
            leg_reaction = if i == 0 { f } else { [leg_reaction[0] + f[0], leg_reaction[1] + f[1]] };
            let tau = -(r[0] * f[1] - r[1] * f[0]);
            leg_torque = if i == 0 { tau } else { leg_torque + tau };
            object_from_eff = if i == 0 {
                touch
            } else {
                [object_from_eff[0] + touch[0], object_from_eff[1] + touch[1]]
            };
        }
        let base_touch = disk_contact(
            st.base_pos,
            st.base_vel,
            st.object_pos,
            st.object_vel,
            c.object_radius + c.base_radius,
            c.contact_stiffness,
            c.contact_damping,
        );
        let cmd_world = rotate(st.base_yaw, [self.base_cmd[0], self.base_cmd[1]]);
        let drive = [
            m_b * gain_v * (cmd_world[0] - st.base_vel[0]),
            m_b * gain_v * (cmd_world[1] - st.base_vel[1]),
        ];
        let base_force = [
            drive[0] - leg_reaction[0] + base_touch[0],
            drive[1] - leg_reaction[1] + base_touch[1],
        ];
        let base_torque = i_b * gain_w * (self.base_cmd[2] - st.base_omega) + leg_torque;

        let speed = norm(st.object_vel);
        let limit = self.dynamics.friction * m_o * c.gravity;
        let fric_mag = (c.object_viscous * speed).min(limit);
        let fric = if speed > 0.0 {
            [-fric_mag * st.object_vel[0] / speed, -fric_mag * st.object_vel[1] / speed]
        } else {
            [0.0, 0.0]
        };
        let object_force = [
            -object_from_eff[0] - base_touch[0] + fric[0],
            -object_from_eff[1] - base_touch[1] + fric[1],
        ];

        let st = &mut self.state;
        for k in 0..2 {
            st.base_vel[k] += base_force[k] / m_b * dt;
            st.base_pos[k] += st.base_vel[k] * dt;
            st.object_vel[k] += object_force[k] / m_o * dt;
            st.object_pos[k] += st.object_vel[k] * dt;
            for i in 0..n {
                st.eff_vel[i][k] += eff_force[i][k] / m_e * dt;
                st.eff_pos[i][k] += st.eff_vel[i][k] * dt;
            }
        }
        st.base_omega += base_torque / i_b * dt;
        st.base_yaw += st.base_omega * dt;
    }

    /// Where each effector should touch the object this step.
    pub fn anchors(&self) -> Vec<[f64; 2]> {
        let c = &self.config;
        let st = &self.state;
        let to_dest = sub(st.destination, st.object_pos);
        let d = norm(to_dest);
        let dir = if d > 0.0 { [to_dest[0] / d, to_dest[1] / d] } else { [1.0, 0.0] };
        let back = [-dir[0], -dir[1]];
        let r = c.object_radius + c.effector_radius;
        let at = |v: [f64; 2]| [st.object_pos[0] + r * v[0], st.object_pos[1] + r * v[1]];
        if c.effectors == 1 {
            vec![at(back)]
        } else {
            vec![at(rotate(-c.anchor_angle, back)), at(rotate(c.anchor_angle, back))]
        }
    }

    fn touching(&self) -> Vec<bool> {
        let c = &self.config;
        self.state
            .eff_pos
            .iter()
            .map(|p| norm(sub(*p, self.state.object_pos)) <= c.object_radius + c.effector_radius + c.contact_slack)
            .collect()
    }

    fn joint_positions(&self) -> Vec<f64> {
        let st = &self.state;
        let rest = self.config.rest_offsets();
        let mut out = Vec::with_capacity(2 * rest.len());
        for (i, r) in rest.iter().enumerate() {
            let local = rotate(-st.base_yaw, sub(st.eff_pos[i], st.base_pos));
            out.extend_from_slice(&[local[0] - r[0], local[1] - r[1]]);
        }
        out
    }

    fn joint_velocities(&self) -> Vec<f64> {
        let st = &self.state;
        let mut out = Vec::with_capacity(2 * st.eff_pos.len());
        for i in 0..st.eff_pos.len() {
            let r = sub(st.eff_pos[i], st.base_pos);
            let rdot = sub(st.eff_vel[i], st.base_vel);
            let v = [rdot[0] + st.base_omega * r[1], rdot[1] - st.base_omega * r[0]];
            out.extend_from_slice(&rotate(-st.base_yaw, v));
        }
        out
    }

    fn frame(&self) -> Vec<f64> {
        let mut f = self.joint_positions();
        f.extend(self.joint_velocities());
        f.extend_from_slice(&self.last_cmd);
        f
    }

    fn observation(&self) -> Vec<f64> {
        let st = &self.state;
        let pose = st.pose();
        let mut o = self.history.flatten();
        let v = rotate(-st.base_yaw, st.base_vel);
        o.extend_from_slice(&[v[0], v[1], st.base_omega]);
        for a in self.anchors() {
            o.extend_from_slice(&pose.to_local(a));
        }
        o.extend_from_slice(&pose.to_local(st.destination));
        debug_assert_eq!(o.len(), self.config.obs_dim());
        o
    }

    fn curiosity_obs(&self, touching: &[bool]) -> Vec<f64> {
        let s = &self.state;
        let mut v = vec![s.base_pos[0], s.base_pos[1], s.base_yaw, s.base_vel[0], s.base_vel[1], s.base_omega];
        for p in &s.eff_pos {
            v.extend_from_slice(p);
        }
        v.extend(touching.iter().map(|&t| if t { 1.0 } else { 0.0 }));
        v
    }

    /// Contact goal with every region moved onto its effector's anchor.
    fn anchored_goal(&self, n_stage: usize) -> ContactGoal {
        let anchors = self.anchors();
        let names = self.config.effector_names();
        let mut goal = self.plan.stage(n_stage).contact_goal();
        for (name, req) in goal.requirements.iter_mut() {
            if let ContactRequirement::InContactWithin { region } = req {
                let i = names.iter().position(|n| n == name).expect("validated plan");
                let a = anchors[i];
                *region = Region::world([a[0] + region.lo[0], a[1] + region.lo[1]], [a[0] + region.hi[0], a[1] + region.hi[1]]);
            }
        }
        goal
    }

    fn zero_reg(&self) -> RegSignals {
        let n = self.config.effectors;
        RegSignals {
            yaw_rate: Some(0.0),
            dof_acc: Some(vec![0.0; 2 * n]),
            dof_vel: Some(vec![0.0; 2 * n]),
            action_delta: Some(vec![0.0; self.config.act_dim()]),
            terminated: Some(false),
            ..Default::default()
        }
    }

    fn fault(&mut self, msg: String) -> Transition {
        let dim = self.config.curiosity_dim();
        Transition {
            obs: self.observation(),
            signals: StepSignals {
                status: self.status,
                reg: RegSignals {
                    terminated: Some(true),
                    ..self.zero_reg()
                },
                task: TaskSignals::None,
            },
            curiosity_obs: vec![0.0; dim],
            curiosity_obs_mirrored: vec![0.0; dim],
            terminated: true,
            truncated: false,
            success: false,
            fault: Some(msg),
        }
    }

    fn transport_inputs(&self, n_stage: usize) -> TransportInputs {
        let st = &self.state;
        let pose = st.pose();
        let anchors = self.anchors();
        let d: Vec<f64> = (0..self.config.effectors).map(|i| norm(sub(st.eff_pos[i], anchors[i]))).collect();
        let dest = pose.to_local(st.destination);
        let obj = pose.to_local(st.object_pos);
        TransportInputs {
            d_obj2dest: norm(sub(st.object_pos, st.destination)),
            d_left2obj: d[0],
            d_right2obj: *d.last().expect("at least one effector"),
            theta_dest: dest[1].atan2(dest[0]),
            theta_obj: obj[1].atan2(obj[0]),
            n_stage,
        }
    }
}

fn mirror_requirement(req: ContactRequirement) -> ContactRequirement {
    match req {
        ContactRequirement::InContactWithin { region } => ContactRequirement::InContactWithin {
            region: Region {
                frame: region.frame,
                lo: [region.lo[0], -region.hi[1]],
                hi: [region.hi[0], -region.lo[1]],
            },
        },
        other => other,
    }
}

impl Environment for PusherEnv {
    fn name(&self) -> &'static str {
        "pusher"
    }

    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    fn act_dim(&self) -> usize {
        self.config.act_dim()
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
        self.dynamics
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = self.config.clone();
        self.dynamics = match &self.randomization {
            Some(r) => r.sample(&mut rng, c.control_dt),
            None => DynamicsSample::nominal(c.friction),
        };
        let noise = c.init_noise;
        let mut u = |scale: f64| -> f64 {
            if noise == 0.0 {
                0.0
            } else {
                rng.random_range(-1.0..=1.0) * scale * noise
            }
        };
        let yaw = u(0.1);
        let base = [u(0.05), u(0.05)];
        let object = [c.object_start[0] + u(0.05), c.object_start[1] + u(0.1)];
        let destination = [object[0] + c.destination_distance, object[1] + u(c.destination_spread)];
        let eff_pos = c
            .rest_offsets()
            .iter()
            .map(|r| {
                let w = rotate(yaw, *r);
                [base[0] + w[0], base[1] + w[1]]
            })
            .collect();
        self.state = PusherState {
            base_pos: base,
            base_yaw: yaw,
            base_vel: [0.0; 2],
            base_omega: 0.0,
            eff_pos,
            eff_vel: vec![[0.0; 2]; c.effectors],
            object_pos: object,
            object_vel: [0.0; 2],
            destination,
        };
        self.rng = rng;
        let zero = vec![0.0; c.act_dim()];
        self.set_command(&zero);
        self.status = StageStatus::default();
        self.last_cmd = zero.clone();
        self.pending = std::iter::repeat_n(zero, self.dynamics.delay_steps).collect();
        self.last_joint_vel = self.joint_velocities();
        self.push = PushTimer::new(self.dynamics.push_interval_steps);
        self.steps = 0;
        self.history.reset(self.frame());
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let dim = self.config.act_dim();
        if action.len() != dim {
            return self.fault(format!("pusher expects {dim} action components, got {}", action.len()));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return self.fault("non-finite action".into());
        }
        let cmd: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        self.pending.push_back(cmd.clone());
        let applied = self.pending.pop_front().unwrap_or_else(|| cmd.clone());
        self.set_command(&applied);
        for _ in 0..self.config.substeps {
            self.substep();
        }
        if self.push.tick() {
            self.state.base_vel = apply_push(self.state.base_vel, self.dynamics.push_dv, &mut self.rng);
        }
        self.steps += 1;
        if !self.state.to_vec().iter().all(|v| v.is_finite()) {
            return self.fault("non-finite pusher state".into());
        }

        let touching = self.touching();
        let names = self.config.effector_names();
        let observed: Vec<(&str, ObservedContact)> = names
            .iter()
            .enumerate()
            .map(|(i, &name)| {
                (
                    name,
                    ObservedContact {
                        in_contact: touching[i],
                        position: self.state.eff_pos[i],
                    },
                )
            })
            .collect();
        let n_stage = self.status.n_stage;
        let goal = self.anchored_goal(n_stage);
        let snapshot = TaskSnapshot {
            posture: None,
            object_to_destination: Some(norm(sub(self.state.object_pos, self.state.destination))),
        };
        let eval = evaluate_contacts(&observed, &goal, &self.state.pose()).expect("validated plan");
        let f_task = evaluate_task(&snapshot, &self.plan.stage(n_stage).task).expect("validated plan");
        let mut status = advance(self.status, eval.fulfilled, f_task, &self.plan);
        status.n_corr = eval.n_corr;
        status.n_wrong = eval.n_wrong;
        self.status = status;

        let success = status.plan_complete;
        let truncated = self.steps >= self.config.episode_steps || (success && self.config.end_on_complete);
        let joint_vel = self.joint_velocities();
        let dt = self.config.control_dt;
        let c = &self.config;
        let units: Vec<f64> = [c.max_speed, c.max_speed, c.max_yaw_rate]
            .into_iter()
            .chain(std::iter::repeat_n(c.reach, 2 * c.effectors))
            .collect();
        let reg = RegSignals {
            yaw_rate: Some(self.state.base_omega),
            dof_acc: Some(joint_vel.iter().zip(&self.last_joint_vel).map(|(a, b)| (a - b) / dt).collect()),
            dof_vel: Some(joint_vel.clone()),
            action_delta: Some((0..dim).map(|i| units[i] * (cmd[i] - self.last_cmd[i])).collect()),
            terminated: Some(false),
            ..Default::default()
        };
        let task = TaskSignals::Transport {
            inputs: self.transport_inputs(status.n_stage),
            angle_gates: self.config.effectors == 2,
        };
        self.last_joint_vel = joint_vel;
        self.last_cmd = cmd;
        self.history.push(self.frame());
        let curiosity_obs = self.curiosity_obs(&touching);
        let curiosity_obs_mirrored = self.curiosity_mirror.apply(&curiosity_obs);
        Transition {
            obs: self.observation(),
            signals: StepSignals { status, reg, task },
            curiosity_obs,
            curiosity_obs_mirrored,
            terminated: false,
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
        let n = self.config.effectors;
        let x_hi = self.config.object_start[0] + self.config.destination_distance + 1.0;
        let mut lo = vec![-1.0, -2.0, -PI, -1.5, -1.5, -3.0];
        let mut hi = vec![x_hi, 2.0, PI, 1.5, 1.5, 3.0];
        for _ in 0..n {
            lo.extend_from_slice(&[-1.0, -2.0]);
            hi.extend_from_slice(&[x_hi, 2.0]);
        }
        lo.extend(std::iter::repeat_n(0.0, n));
        hi.extend(std::iter::repeat_n(1.0, n));
        ObsRanges::new(lo, hi).expect("static ranges are well formed")
    }

    fn reg_terms(&self) -> &'static [RegTerm] {
        REG_TERMS
    }

    fn state_columns(&self) -> Vec<String> {
        PusherState::columns(self.config.effectors)
    }

    fn state_row(&self) -> Vec<f64> {
        self.state.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stage::Stage;
    use std::collections::BTreeMap;

    pub(crate) fn plan(names: &[&str]) -> StagePlan {
        let near = ContactRequirement::InContactWithin {
            region: Region::world([-0.07, -0.07], [0.07, 0.07]),
        };
        let contacts: BTreeMap<String, ContactRequirement> = names.iter().map(|n| (n.to_string(), near)).collect();
        StagePlan::new(
            vec![
                Stage {
                    contacts: contacts.clone(),
                    task: TaskGoal::AlwaysFulfilled,
                },
                Stage {
                    contacts,
                    task: TaskGoal::Transport { threshold: 0.15 },
                },
            ],
            5,
        )
        .unwrap()
    }

    #[test]
    fn zero_action_leaves_object_alone() {
        let mut env = PusherEnv::new(PusherConfig::default(), plan(&["left_hand", "right_hand"])).unwrap();
        env.reset(2);
        let start = env.state().object_pos;
        for _ in 0..200 {
            let t = env.step(&[0.0; 7]);
            assert!(!t.terminated);
            assert_eq!(t.signals.status.n_wrong, 0);
        }
        assert_eq!(env.state().object_pos, start);
    }

    #[test]
    fn pushing_forward_moves_the_object() {
        let mut env = PusherEnv::new(PusherConfig::default(), plan(&["left_hand", "right_hand"])).unwrap();
        env.reset(2);
        let start = env.state().object_pos;
        for _ in 0..150 {
            env.step(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        assert!(env.state().object_pos[0] > start[0] + 0.3);
    }

    #[test]
    fn mirror_maps_are_involutions() {
        for n in [1usize, 2] {
            let names: &[&str] = if n == 1 { &["hand"] } else { &["left_hand", "right_hand"] };
            let cfg = PusherConfig {
                effectors: n,
                ..Default::default()
            };
            let mut env = PusherEnv::new(cfg, plan(names)).unwrap();
            let o = env.reset(5);
            assert_eq!(env.mirror_obs(&env.mirror_obs(&o)), o);
            let a: Vec<f64> = (0..env.act_dim()).map(|i| i as f64 * 0.1 - 0.2).collect();
            assert_eq!(env.mirror_act(&env.mirror_act(&a)), a);
        }
    }

    #[test]
    fn wrong_effector_name_is_a_config_error() {
        let err = PusherEnv::new(PusherConfig::default(), plan(&["foot"])).err().unwrap();
        assert!(err.is_config());
    }
}
