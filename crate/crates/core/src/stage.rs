//! Contact stages: goals, fulfillment checks, and stage advancement.
//!
//! A task is an ordered [`StagePlan`]. Each stage pairs a [`ContactGoal`]
//! (which end effectors must touch which regions, or stay in the air) with a
//! [`TaskGoal`]. A stage counts as fulfilled only while both hold, and the
//! plan advances once fulfillment has been held for `dwell_steps`
//! consecutive control steps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame in which a [`Region`] is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    World,
    Body,
}

/// Planar pose of the agent base: position plus heading angle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: [f64; 2],
    pub angle: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, angle: f64) -> Self {
        Self {
            position: [x, y],
            angle,
        }
    }

    /// Express a world-frame point in this pose's frame.
    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        let dx = p[0] - self.position[0];
        let dy = p[1] - self.position[1];
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Express a local point in the world frame.
    pub fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [
            self.position[0] + c * p[0] - s * p[1],
            self.position[1] + s * p[0] + c * p[1],
        ]
    }
}

/// Axis-aligned box, closed on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub frame: Frame,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Region {
    pub fn world(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self {
            frame: Frame::World,
            lo,
            hi,
        }
    }

    pub fn body(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self {
            frame: Frame::Body,
            lo,
            hi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.lo.iter().chain(&self.hi).all(|v| v.is_finite());
        if !finite || self.lo[0] > self.hi[0] || self.lo[1] > self.hi[1] {
            return Err(Error::config(format!(
                "region lo {:?} must be finite and componentwise <= hi {:?}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Containment test for a world-frame point. Body-frame regions are
    /// resolved against `base` first.
    pub fn contains(&self, world_point: [f64; 2], base: &Pose2) -> bool {
        let p = match self.frame {
            Frame::World => world_point,
            Frame::Body => base.to_local(world_point),
        };
        p[0] >= self.lo[0] && p[0] <= self.hi[0] && p[1] >= self.lo[1] && p[1] <= self.hi[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.lo[0] + self.hi[0]),
            0.5 * (self.lo[1] + self.hi[1]),
        ]
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.frame == other.frame
            && self.lo[0] < other.hi[0]
            && other.lo[0] < self.hi[0]
            && self.lo[1] < other.hi[1]
            && other.lo[1] < self.hi[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContactRequirement {
    InContactWithin {
        #[serde(flatten)]
        region: Region,
    },
    Airborne,
    Unconstrained,
}

impl ContactRequirement {
    pub fn is_constrained(&self) -> bool {
        !matches!(self, ContactRequirement::Unconstrained)
    }
}

/// Required contact state per end effector. Effectors that are not listed
/// are unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactGoal {
    pub requirements: BTreeMap<String, ContactRequirement>,
}

impl ContactGoal {
    pub fn new<I, S>(reqs: I) -> Self
    where
        I: IntoIterator<Item = (S, ContactRequirement)>,
        S: Into<String>,
    {
        Self {
            requirements: reqs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn requirement(&self, effector: &str) -> ContactRequirement {
        self.requirements
            .get(effector)
            .copied()
            .unwrap_or(ContactRequirement::Unconstrained)
    }

    pub fn constrained_count(&self) -> usize {
        self.requirements
            .values()
            .filter(|r| r.is_constrained())
            .count()
    }
}

/// Contact reading for one end effector at one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObservedContact {
    pub in_contact: bool,
    /// World-frame contact point (or effector position when not touching).
    pub position: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ContactEvaluation {
    pub fulfilled: bool,
    pub n_corr: usize,
    pub n_wrong: usize,
}

/// Classify every constrained effector as correct, wrong, or neither.
///
/// An effector is wrong only when it is touching something in a way its
/// requirement forbids. An effector that has not reached its region yet is
/// neither correct nor wrong.
pub fn evaluate_contacts(
    contacts: &[(&str, ObservedContact)],
    goal: &ContactGoal,
    base: &Pose2,
) -> Result<ContactEvaluation> {
    let mut eval = ContactEvaluation {
        fulfilled: true,
        ..Default::default()
    };
    for (name, req) in &goal.requirements {
        let observed = contacts
            .iter()
            .find(|(id, _)| id == name)
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::config(format!("unknown end effector `{name}` in contact goal")))?;
        match req {
            ContactRequirement::Unconstrained => {}
            ContactRequirement::Airborne => {
                if observed.in_contact {
                    eval.n_wrong += 1;
                    eval.fulfilled = false;
                } else {
                    eval.n_corr += 1;
                }
            }
            ContactRequirement::InContactWithin { region } => {
                if !observed.in_contact {
                    eval.fulfilled = false;
                } else if region.contains(observed.position, base) {
                    eval.n_corr += 1;
                } else {
                    eval.n_wrong += 1;
                    eval.fulfilled = false;
                }
            }
        }
    }
    Ok(eval)
}

/// Thresholds and targets for the non-contact half of a stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskGoal {
    /// Hold a body-frame posture: a joint angle and optionally a point on
    /// the limb.
    Posture {
        angle: f64,
        #[serde(default = "default_angle_tolerance")]
        angle_tolerance: f64,
        #[serde(default)]
        position: Option<[f64; 2]>,
        #[serde(default = "default_position_tolerance")]
        position_tolerance: f64,
    },
    /// Bring an object within `threshold` meters of its destination.
    Transport { threshold: f64 },
    AlwaysFulfilled,
}

fn default_angle_tolerance() -> f64 {
    0.2
}

fn default_position_tolerance() -> f64 {
    0.05
}

impl TaskGoal {
    pub fn posture(angle: f64) -> Self {
        TaskGoal::Posture {
            angle,
            angle_tolerance: default_angle_tolerance(),
            position: None,
            position_tolerance: default_position_tolerance(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PostureReading {
    pub angle: f64,
    pub position: [f64; 2],
}

/// Whatever part of the environment state a task goal may look at.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TaskSnapshot {
    pub posture: Option<PostureReading>,
    pub object_to_destination: Option<f64>,
}

/// Wrap an angle difference into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

pub fn evaluate_task(snapshot: &TaskSnapshot, goal: &TaskGoal) -> Result<bool> {
    match *goal {
        TaskGoal::AlwaysFulfilled => Ok(true),
        TaskGoal::Transport { threshold } => {
            let d = snapshot
                .object_to_destination
                .ok_or_else(|| Error::config("transport goal needs an object-destination distance"))?;
            Ok(d < threshold)
        }
        TaskGoal::Posture {
            angle,
            angle_tolerance,
            position,
            position_tolerance,
        } => {
            let reading = snapshot
                .posture
                .ok_or_else(|| Error::config("posture goal needs a posture reading"))?;
            let rot_ok = wrap_angle(reading.angle - angle).abs() <= angle_tolerance;
            let pos_ok = match position {
                None => true,
                Some(target) => {
                    let dx = reading.position[0] - target[0];
                    let dy = reading.position[1] - target[1];
                    dx.hypot(dy) <= position_tolerance
                }
            };
            Ok(rot_ok && pos_ok)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(default)]
    pub contacts: BTreeMap<String, ContactRequirement>,
    pub task: TaskGoal,
}

impl Stage {
    pub fn contact_goal(&self) -> ContactGoal {
        ContactGoal {
            requirements: self.contacts.clone(),
        }
    }
}

fn default_dwell() -> usize {
    5
}

/// Ordered list of contact stages plus the dwell period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
    #[serde(default = "default_dwell")]
    pub dwell_steps: usize,
}

impl StagePlan {
    pub fn new(stages: Vec<Stage>, dwell_steps: usize) -> Result<Self> {
        let plan = Self {
            stages,
            dwell_steps,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::config("stage plan needs at least one stage"));
        }
        if self.dwell_steps == 0 {
            return Err(Error::config("dwell_steps must be >= 1"));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            for (name, req) in &stage.contacts {
                if let ContactRequirement::InContactWithin { region } = req {
                    region
                        .validate()
                        .map_err(|e| Error::config(format!("stage {i}, effector `{name}`: {e}")))?;
                }
            }
            if let TaskGoal::Transport { threshold } = stage.task {
                if !(threshold > 0.0) {
                    return Err(Error::config(format!("stage {i}: transport threshold must be > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: StagePlan =
            toml::from_str(text).map_err(|e| Error::config(format!("bad stage plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read stage plan {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("stage plans always serialize")
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Stage `i`, padded with the final stage past the end of the plan.
    pub fn stage(&self, i: usize) -> &Stage {
        &self.stages[i.min(self.stages.len() - 1)]
    }

    /// Largest number of constrained effectors in any stage.
    pub fn n_con(&self) -> usize {
        self.stages
            .iter()
            .map(|s| s.contacts.values().filter(|r| r.is_constrained()).count())
            .max()
            .unwrap_or(0)
    }

    /// Every effector named anywhere in the plan.
    pub fn effectors(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .stages
            .iter()
            .flat_map(|s| s.contacts.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

/// Per-episode stage bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStatus {
    pub n_stage: usize,
    pub f_con: bool,
    pub f_task: bool,
    pub n_corr: usize,
    pub n_wrong: usize,
    pub dwell_counter: usize,
    pub plan_complete: bool,
}

impl StageStatus {
    /// Fraction of the plan fulfilled so far.
    pub fn progress(&self, plan: &StagePlan) -> f64 {
        self.n_stage as f64 / plan.len() as f64
    }
}

/// Advance the stage counter by one control step.
///
/// Fulfillment (`f_con && f_task`) must hold for `dwell_steps` consecutive
/// calls before `n_stage` increments; any unfulfilled step resets the count.
pub fn advance(status: StageStatus, f_con: bool, f_task: bool, plan: &StagePlan) -> StageStatus {
    let mut next = status;
    next.f_con = f_con;
    next.f_task = f_task;
    if status.plan_complete {
        return next;
    }
    if f_con && f_task {
        next.dwell_counter += 1;
        if next.dwell_counter >= plan.dwell_steps {
            next.n_stage += 1;
            next.dwell_counter = 0;
            next.plan_complete = next.n_stage >= plan.len();
        }
    } else {
        next.dwell_counter = 0;
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_stone() -> ContactRequirement {
        ContactRequirement::InContactWithin {
            region: Region::world([1.0, -0.05], [1.3, 0.05]),
        }
    }

    fn plan(dwell: usize, n: usize) -> StagePlan {
        let stage = Stage {
            contacts: BTreeMap::new(),
            task: TaskGoal::AlwaysFulfilled,
        };
        StagePlan::new(vec![stage; n], dwell).unwrap()
    }

    #[test]
    fn worked_example_one_right_one_wrong() {
        let goal = ContactGoal::new([
            ("right_foot", on_stone()),
            ("left_foot", ContactRequirement::Airborne),
        ]);
        let contacts = [
            (
                "right_foot",
                ObservedContact {
                    in_contact: true,
                    position: [1.1, 0.0],
                },
            ),
            (
                "left_foot",
                ObservedContact {
                    in_contact: true,
                    position: [0.6, 0.0],
                },
            ),
        ];
        let eval = evaluate_contacts(&contacts, &goal, &Pose2::default()).unwrap();
        assert_eq!(
            eval,
            ContactEvaluation {
                fulfilled: false,
                n_corr: 1,
                n_wrong: 1
            }
        );
    }

    #[test]
    fn unconstrained_goal_is_trivially_fulfilled() {
        let goal = ContactGoal::new([
            ("a", ContactRequirement::Unconstrained),
            ("b", ContactRequirement::Unconstrained),
        ]);
        let contacts = [
            (
                "a",
                ObservedContact {
                    in_contact: true,
                    position: [5.0, 5.0],
                },
            ),
            ("b", ObservedContact::default()),
        ];
        let eval = evaluate_contacts(&contacts, &goal, &Pose2::default()).unwrap();
        assert_eq!((eval.fulfilled, eval.n_corr, eval.n_wrong), (true, 0, 0));
    }

    #[test]
    fn not_yet_touching_is_neither_correct_nor_wrong() {
        let goal = ContactGoal::new([("foot", on_stone())]);
        let contacts = [("foot", ObservedContact::default())];
        let eval = evaluate_contacts(&contacts, &goal, &Pose2::default()).unwrap();
        assert_eq!((eval.fulfilled, eval.n_corr, eval.n_wrong), (false, 0, 0));
    }

    #[test]
    fn unknown_effector_is_a_config_error() {
        let goal = ContactGoal::new([("hand", ContactRequirement::Airborne)]);
        let err = evaluate_contacts(&[], &goal, &Pose2::default()).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn body_frame_region_follows_the_base() {
        let region = Region::body([0.9, -0.1], [1.1, 0.1]);
        let base = Pose2::new(2.0, 0.0, std::f64::consts::FRAC_PI_2);
        // One meter ahead of a base facing +y.
        assert!(region.contains([2.0, 1.0], &base));
        assert!(!region.contains([3.0, 0.0], &base));
    }

    #[test]
    fn task_goals() {
        let snap = TaskSnapshot {
            posture: Some(PostureReading {
                angle: 0.7,
                position: [0.1, 0.2],
            }),
            object_to_destination: Some(0.05),
        };
        assert!(evaluate_task(&TaskSnapshot::default(), &TaskGoal::AlwaysFulfilled).unwrap());
        assert!(evaluate_task(&snap, &TaskGoal::Transport { threshold: 0.1 }).unwrap());
        assert!(!evaluate_task(&snap, &TaskGoal::Transport { threshold: 0.05 }).unwrap());
        let exact = TaskGoal::Posture {
            angle: 0.7,
            angle_tolerance: 0.2,
            position: Some([0.1, 0.2]),
            position_tolerance: 0.05,
        };
        assert!(evaluate_task(&snap, &exact).unwrap());
        assert!(!evaluate_task(&snap, &TaskGoal::posture(0.0)).unwrap());
        let err = evaluate_task(&TaskSnapshot::default(), &TaskGoal::posture(0.0)).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn minimal_dwell_advances_next_step() {
        let p = plan(1, 3);
        let s = advance(StageStatus::default(), true, true, &p);
        assert_eq!(s.n_stage, 1);
        assert_eq!(s.dwell_counter, 0);
        assert!(!s.plan_complete);
    }

    #[test]
    fn task_goal_is_required() {
        let p = plan(1, 3);
        let mut s = StageStatus::default();
        for _ in 0..100 {
            s = advance(s, true, false, &p);
        }
        assert_eq!(s.n_stage, 0);
    }

    #[test]
    fn dwell_needs_consecutive_fulfillment() {
        // Reference: count consecutive trues, advance when the run hits 3.
        let pattern = [true, true, false, true, true, true];
        let p = plan(3, 4);
        let mut s = StageStatus::default();
        let mut run = 0;
        let mut expected_stage = 0;
        for (i, &ok) in pattern.iter().enumerate() {
            run = if ok { run + 1 } else { 0 };
            if run == 3 {
                expected_stage += 1;
                run = 0;
            }
            s = advance(s, ok, ok, &p);
            assert_eq!(s.n_stage, expected_stage, "step {i}");
            assert_eq!(s.dwell_counter, run, "step {i}");
        }
        assert_eq!(s.n_stage, 1);
    }

    #[test]
    fn completion_is_flagged_past_the_last_stage() {
        let p = plan(1, 2);
        let mut s = StageStatus::default();
        s = advance(s, true, true, &p);
        s = advance(s, true, true, &p);
        assert!(s.plan_complete);
        assert_eq!(s.n_stage, 2);
        let after = advance(s, true, true, &p);
        assert_eq!(after.n_stage, 2);
    }

    #[test]
    fn stage_lookup_pads_with_the_final_stage() {
        let mut p = plan(1, 2);
        p.stages[1].task = TaskGoal::posture(1.0);
        assert_eq!(p.stage(5).task, TaskGoal::posture(1.0));
    }

    #[test]
    fn plan_round_trips_through_toml() {
        let text = r#"
dwell_steps = 4

[[stages]]
task = { kind = "posture", angle = 1.0 }
[stages.contacts]
left_foot = { kind = "in_contact_within", frame = "world", lo = [0.4, -0.05], hi = [0.7, 0.05] }
right_foot = { kind = "airborne" }

[[stages]]
task = { kind = "always_fulfilled" }
[stages.contacts]
left_foot = { kind = "unconstrained" }
"#;
        let p = StagePlan::from_toml_str(text).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.dwell_steps, 4);
        assert_eq!(p.n_con(), 2);
        assert_eq!(p.effectors(), vec!["left_foot", "right_foot"]);
        let again = StagePlan::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn inverted_region_is_rejected() {
        let text = r#"
[[stages]]
task = { kind = "always_fulfilled" }
[stages.contacts]
foot = { kind = "in_contact_within", frame = "world", lo = [1.0, 0.0], hi = [0.0, 0.0] }
"#;
        assert!(StagePlan::from_toml_str(text).unwrap_err().is_config());
        assert!(StagePlan::from_toml_str("stages = []").unwrap_err().is_config());
    }
}
