//! Drivers behind the command-line verbs: train every seed of a config,
//! evaluate a checkpoint, sweep reward ablations, and check golden values.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::{ResolvedRun, RunConfig};
use crate::curiosity::{bin2dec, curiosity_reward, HashNetwork, VisitTable};
use crate::envs::derive_seed;
use crate::error::{Error, Result};
use crate::rewards::{contact_reward, reward_parts, total_reward, Preset, RewardBreakdown, RewardMode};
use crate::trainer::{train, Checkpoint, CurriculumConfig, CurriculumState, RunSummary};

/// Train every seed listed in the config under `root`.
pub fn train_all(run: &ResolvedRun, root: &Path) -> Result<Vec<RunSummary>> {
    run.config
        .seeds
        .iter()
        .map(|&seed| train(run, seed, &run.run_dir(root, seed)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Sample dynamics from the run's randomization intervals.
    pub randomize: bool,
    /// Write per-step states, actions and rewards here.
    pub trajectory: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            episodes: 20,
            seed: 0,
            randomize: false,
            trajectory: None,
        }
    }
}

/// Deterministic evaluation with mean actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env: String,
    pub mode: String,
    pub checkpoint_iteration: usize,
    pub episodes: usize,
    pub seed: u64,
    pub mean_progress: f64,
    pub min_progress: f64,
    pub max_progress: f64,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
    /// Per-step means of each reward term (curiosity is not paid at evaluation).
    pub reward_terms: BTreeMap<String, f64>,
}

pub fn evaluate(ckpt: &Checkpoint, opts: &EvalOptions) -> Result<EvalReport> {
    if opts.episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let run = RunConfig::from_toml_str(&ckpt.config, &[])?.resolve()?;
    let mut env = run.config.env.build(&run.plan)?;
    if env.name() != ckpt.env || env.obs_dim() != ckpt.obs_dim || env.act_dim() != ckpt.act_dim {
        return Err(Error::fault(format!(
            "checkpoint was trained on {} ({}-d obs, {}-d actions); config builds {} ({}-d, {}-d)",
            ckpt.env,
            ckpt.obs_dim,
            ckpt.act_dim,
            env.name(),
            env.obs_dim(),
            env.act_dim()
        )));
    }
    if opts.randomize {
        env.set_randomization(Some(run.config.randomization.clone()));
    }
    let mut rewards = run.rewards.clone();
    rewards.reg_scale = ckpt.curriculum.reg_scale;
    let mode = run.config.mode;

    let mut writer = match &opts.trajectory {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = csv::Writer::from_writer(file);
            let mut header: Vec<String> = vec!["episode".into(), "step".into()];
            header.extend(env.state_columns());
            header.extend((0..env.act_dim()).map(|i| format!("action_{i}")));
            header.extend(["n_stage", "n_corr", "n_wrong"].map(String::from));
            header.extend(RewardBreakdown::COLUMNS.map(String::from));
            w.write_record(&header)?;
            Some(w)
        }
        None => None,
    };

    let mut progress = Vec::with_capacity(opts.episodes);
    let mut successes = 0usize;
    let mut returns = 0.0;
    let mut steps = 0usize;
    let mut sums = [0.0; 6];
    for ep in 0..opts.episodes {
        let mut obs = env.reset(derive_seed(opts.seed, 0, ep as u64));
        let mut step = 0usize;
        loop {
            let a = mean_action(ckpt, &obs);
            let t = env.step(&a);
            if let Some(msg) = &t.fault {
                return Err(Error::fault(format!("episode {ep}, step {step}: {msg}")));
            }
            let parts = reward_parts(&t.signals, &rewards, mode, 0.0)?;
            let b = total_reward(&parts, &rewards);
            for (s, v) in sums.iter_mut().zip(b.values()) {
                *s += v;
            }
            returns += b.r_total;
            if let Some(w) = writer.as_mut() {
                let s = &t.signals.status;
                let mut row: Vec<String> = vec![ep.to_string(), step.to_string()];
                row.extend(env.state_row().iter().map(|v| v.to_string()));
                row.extend(a.iter().map(|v| v.to_string()));
                row.extend([s.n_stage, s.n_corr, s.n_wrong].map(|v| v.to_string()));
                row.extend(b.values().iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
            step += 1;
            if t.done() {
                progress.push(t.signals.status.progress(&run.plan));
                successes += usize::from(t.success);
                break;
            }
            obs = t.obs;
        }
        steps += step;
    }
    if let Some(mut w) = writer {
        w.flush().map_err(|e| Error::io(opts.trajectory.clone().unwrap_or_default(), e))?;
    }

    let n = opts.episodes as f64;
    let per_step = steps.max(1) as f64;
    let reward_terms = RewardBreakdown::COLUMNS
        .iter()
        .zip(sums)
        .map(|(k, s)| (k.to_string(), s / per_step))
        .collect();
    Ok(EvalReport {
        env: ckpt.env.clone(),
        mode: mode.name().into(),
        checkpoint_iteration: ckpt.iteration,
        episodes: opts.episodes,
        seed: opts.seed,
        mean_progress: progress.iter().sum::<f64>() / n,
        min_progress: progress.iter().copied().fold(f64::INFINITY, f64::min),
        max_progress: progress.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        success_rate: successes as f64 / n,
        mean_return: returns / n,
        mean_length: steps as f64 / n,
        reward_terms,
    })
}

fn mean_action(ckpt: &Checkpoint, obs: &[f64]) -> Vec<f64> {
    let x = Array2::from_shape_vec((1, obs.len()), ckpt.obs_norm.apply(obs)).expect("one row");
    ckpt.learner.policy.mean(x.view()).row(0).to_vec()
}

/// Final metrics of one ablation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: String,
    pub seed: u64,
    pub final_progress: f64,
    pub final_return: f64,
    pub success_rate: f64,
    pub metrics: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub rows: Vec<AblationRow>,
    /// Median final progress per mode.
    pub median_progress: BTreeMap<String, f64>,
}

impl AblationSummary {
    /// Final progress of `mode`, in seed order.
    pub fn progress(&self, mode: RewardMode) -> Vec<f64> {
        let mut rows: Vec<&AblationRow> = self.rows.iter().filter(|r| r.mode == mode.name()).collect();
        rows.sort_by_key(|r| r.seed);
        rows.iter().map(|r| r.final_progress).collect()
    }

    pub fn median(&self, mode: RewardMode) -> Option<f64> {
        self.median_progress.get(mode.name()).copied()
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Train every (mode, seed) pair of `config` under `root` and write
/// `ablation.csv` and `ablation.json` next to the runs.
pub fn ablate(config: &RunConfig, modes: &[RewardMode], root: &Path) -> Result<AblationSummary> {
    if modes.is_empty() {
        return Err(Error::config("ablation needs at least one mode"));
    }
    let mut summary = AblationSummary::default();
    for &mode in modes {
        let mut cfg = config.clone();
        cfg.mode = mode;
        let run = cfg.resolve()?;
        for s in train_all(&run, root)? {
            summary.rows.push(AblationRow {
                mode: mode.name().into(),
                seed: s.seed,
                final_progress: s.final_metrics.mean_progress,
                final_return: s.final_metrics.mean_return,
                success_rate: s.final_metrics.success_rate,
                metrics: s.metrics_path(),
            });
        }
        let m = median(&summary.progress(mode)).unwrap_or(0.0);
        summary.median_progress.insert(mode.name().into(), m);
    }
    let dir = root.join(&config.name);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let csv_path = dir.join("ablation.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &summary.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join("ablation.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&json_path, e))?;
    Ok(summary)
}

/// One golden-value check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Reference values every build must reproduce exactly.
pub fn selftest() -> Vec<Check> {
    let mut out = Vec::new();

    let first = contact_reward(1, 1, 2, 0, false, true);
    let later = contact_reward(1, 1, 2, 3, false, true);
    let full = contact_reward(2, 0, 2, 1, true, true);
    out.push(Check::new(
        "contact reward, one right and one wrong foot",
        first == 1.0 && later == -1.0,
        format!("first stage {first}, later stage {later} (want 1, -1)"),
    ));
    out.push(Check::new(
        "contact reward, stage fulfilled with two contacts",
        full == 10.0,
        format!("{full} (want 10)"),
    ));

    let bucket = bin2dec(&[1.5, -0.2, 0.4]);
    out.push(Check::new("hash bucket of [1.5, -0.2, 0.4]", bucket == 5, format!("{bucket} (want 5)")));

    let net = HashNetwork::new(4, 7);
    let mut table = VisitTable::new(net.bits());
    let v = [0.3, -0.1, 0.7, 0.2];
    let worst = (1..=100u32)
        .map(|n| (curiosity_reward(&v, &net, &mut table, true) - 1.0 / f64::from(n).sqrt()).abs())
        .fold(0.0, f64::max);
    out.push(Check::new(
        "curiosity decays as 1/sqrt(visits)",
        worst <= 1e-12,
        format!("max deviation {worst:e} over 100 visits"),
    ));

    let want = [
        (Preset::Parkour, (120.0, 160.0, 20000.0)),
        (Preset::LocoManipulation, (40.0, 160.0, 40000.0)),
        (Preset::Dancing, (10.0, 5.0, 5000.0)),
        (Preset::Cliffside, (20.0, 40.0, 10000.0)),
    ];
    let bad: Vec<String> = want
        .iter()
        .filter(|(p, w)| p.weights() != *w)
        .map(|(p, w)| format!("{p:?}: {:?} != {w:?}", p.weights()))
        .collect();
    out.push(Check::new("preset weights", bad.is_empty(), bad.join("; ")));

    let config = CurriculumConfig {
        phase1_max: Some(1),
        phase2_max: Some(1),
        reg_interval: 1,
        ..Default::default()
    };
    let mut state = CurriculumState::new(&config);
    let mut peak: f64 = 0.0;
    for _ in 0..20 {
        state = state.tick(&config, 0.0);
        peak = peak.max(state.reg_scale);
    }
    out.push(Check::new(
        "regularization ramp stops at 2",
        state.reg_scale == 2.0 && peak == 2.0 && state.reg_steps == 5,
        format!("scale {} after {} increments, peak {peak}", state.reg_scale, state.reg_steps),
    ));
    out
}
