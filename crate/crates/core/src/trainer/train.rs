//! One training run: rollout, reward assembly, advantage estimation,
//! symmetry augmentation, PPO update and curriculum tick, repeated.

use std::collections::VecDeque;
use std::fs::File;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::augment::symmetry_augment;
use super::checkpoint::{Checkpoint, CHECKPOINT_VERSION};
use super::curriculum::CurriculumState;
use super::gae::{compute_gae, normalize};
use super::normalizer::{ReturnScaler, RunningNorm};
use super::policy::{critic, log_prob, GaussianPolicy};
use super::ppo::{Batch, Learner, UpdateStats};
use crate::config::{config_hash, ResolvedRun};
use crate::curiosity::{CuriosityModule, Rnd};
use crate::envs::{Environment, VecEnv};
use crate::error::{Error, Result};
use crate::rewards::{reward_parts, total_reward, RewardBreakdown, RewardConfig, RewardMode};

const OBS_CLIP: f64 = 5.0;

pub const METRICS_COLUMNS: [&str; 21] = [
    "iteration",
    "mean_return",
    "mean_progress",
    "mean_curiosity",
    "reg_scale",
    "phase",
    "r_con",
    "r_stage",
    "r_curi",
    "r_reg",
    "r_task",
    "r_total",
    "success_rate",
    "episodes",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_frac",
    "learning_rate",
    "curiosity_buckets",
];

/// One row of the metrics file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Mean undiscounted return of recently completed episodes.
    pub mean_return: f64,
    /// Mean fraction of the plan fulfilled by recently completed episodes.
    pub mean_progress: f64,
    /// Mean curiosity bonus per step, after the phase multiplier.
    pub mean_curiosity: f64,
    pub reg_scale: f64,
    pub phase: u8,
    /// Per-step means of the reward terms.
    pub terms: RewardBreakdown,
    pub success_rate: f64,
    /// Episodes completed so far.
    pub episodes: usize,
    pub update: UpdateStats,
    pub curiosity_buckets: usize,
}

impl IterationMetrics {
    pub fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.iteration.to_string(),
            self.mean_return.to_string(),
            self.mean_progress.to_string(),
            self.mean_curiosity.to_string(),
            self.reg_scale.to_string(),
            self.phase.to_string(),
        ];
        r.extend(self.terms.values().iter().map(|v| v.to_string()));
        r.push(self.success_rate.to_string());
        r.push(self.episodes.to_string());
        let u = &self.update;
        r.extend([u.policy_loss, u.value_loss, u.entropy, u.approx_kl, u.clip_frac, u.learning_rate].map(|v| v.to_string()));
        r.push(self.curiosity_buckets.to_string());
        r
    }
}

#[derive(Clone, Copy, Debug)]
struct Episode {
    ret: f64,
    progress: f64,
    success: bool,
}

/// Per-environment rollout storage for one iteration.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub obs: Vec<Vec<f64>>,
    pub act: Vec<Vec<f64>>,
    pub logp: Vec<f64>,
    pub value: Vec<f64>,
    pub reward: Vec<f64>,
    pub terms: Vec<RewardBreakdown>,
    pub done: Vec<bool>,
    /// Value of the final observation for truncated steps, else 0.
    pub bootstrap: Vec<f64>,
    pub n_stage: Vec<usize>,
}

pub struct Trainer {
    run: ResolvedRun,
    seed: u64,
    rewards: RewardConfig,
    envs: VecEnv,
    probe: Box<dyn Environment>,
    learner: Learner,
    obs_norm: RunningNorm,
    scaler: ReturnScaler,
    curiosity: CuriosityModule,
    rnd: Option<Rnd>,
    rnd_mean: RunningNorm,
    curriculum: CurriculumState,
    rng: ChaCha8Rng,
    ep_return: Vec<f64>,
    recent: VecDeque<Episode>,
    episodes: usize,
    randomized: bool,
}

impl Trainer {
    pub fn new(run: &ResolvedRun, seed: u64) -> Result<Self> {
        let cfg = &run.config;
        let ppo = &cfg.ppo;
        let envs = VecEnv::new(&cfg.env, &run.plan, ppo.num_envs, seed)?;
        let probe = cfg.env.build(&run.plan)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = GaussianPolicy::new(envs.obs_dim(), envs.act_dim(), &ppo.actor_hidden, ppo.init_std, &mut rng);
        let value = critic(envs.obs_dim(), &ppo.critic_hidden, &mut rng);
        let curiosity = CuriosityModule::new(probe.curiosity_ranges(), cfg.curiosity.clone(), seed ^ 0xc0ffee);
        let rnd = (cfg.mode == RewardMode::RndCuriosity)
            .then(|| Rnd::new(curiosity.net.input_dim(), seed ^ 0xd1ce, cfg.rnd_learning_rate));
        Ok(Self {
            seed,
            rewards: run.rewards.clone(),
            learner: Learner::new(policy, value, ppo.learning_rate),
            obs_norm: RunningNorm::new(envs.obs_dim(), OBS_CLIP),
            scaler: ReturnScaler::new(envs.len(), ppo.gamma),
            curiosity,
            rnd,
            rnd_mean: RunningNorm::new(1, f64::MAX),
            curriculum: CurriculumState::new(&cfg.curriculum),
            rng,
            ep_return: vec![0.0; envs.len()],
            recent: VecDeque::new(),
            episodes: 0,
            randomized: false,
            envs,
            probe,
            run: run.clone(),
        })
    }

    pub fn curriculum(&self) -> &CurriculumState {
        &self.curriculum
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn obs_norm(&self) -> &RunningNorm {
        &self.obs_norm
    }

    fn normalized(&self, rows: &[Vec<f64>]) -> Array2<f64> {
        let dim = self.obs_norm.dim();
        let mut x = Array2::<f64>::zeros((rows.len(), dim));
        for (i, r) in rows.iter().enumerate() {
            x.row_mut(i).assign(&ndarray::ArrayView1::from(&self.obs_norm.apply(r)));
        }
        x
    }

    fn curiosity_bonus(&mut self, trans: &[crate::envs::Transition], rnd_inputs: &mut Vec<Vec<f64>>) -> Vec<f64> {
        let n = trans.len();
        let mult = self.curriculum.curiosity_multiplier();
        let mode = self.run.config.mode;
        if mult == 0.0 || mode == RewardMode::NoCuriosity {
            return vec![0.0; n];
        }
        let n_stage: Vec<usize> = trans.iter().map(|t| t.signals.status.n_stage).collect();
        if let Some(rnd) = &self.rnd {
            let inputs: Vec<Vec<f64>> = trans
                .iter()
                .zip(&n_stage)
                .map(|(t, &s)| self.curiosity.preprocess(&t.curiosity_obs, s))
                .collect();
            let mut x = Array2::<f64>::zeros((n, self.curiosity.net.input_dim()));
            for (i, v) in inputs.iter().enumerate() {
                x.row_mut(i).assign(&ndarray::ArrayView1::from(v));
            }
            let raw = rnd.bonuses(x.view());
            let m = self.rnd_mean.mean[0].max(1e-8);
            let out = raw.iter().map(|b| mult * b / (b + m)).collect();
            self.rnd_mean.update(&raw.iter().map(|b| vec![*b]).collect::<Vec<_>>());
            rnd_inputs.extend(inputs);
            return out;
        }
        let obs: Vec<Vec<f64>> = trans.iter().map(|t| t.curiosity_obs.clone()).collect();
        let mir: Vec<Vec<f64>> = trans.iter().map(|t| t.curiosity_obs_mirrored.clone()).collect();
        self.curiosity.rewards(&obs, &mir, &n_stage).into_iter().map(|b| mult * b).collect()
    }

    /// Collect `horizon` steps from every environment.
    fn rollout(&mut self, rnd_inputs: &mut Vec<Vec<f64>>) -> Result<Vec<Trajectory>> {
        let n = self.envs.len();
        let horizon = self.run.config.ppo.horizon;
        let gamma = self.run.config.ppo.gamma;
        let window = self.run.config.progress_window;
        let mut reward_cfg = self.rewards.clone();
        reward_cfg.reg_scale = self.curriculum.reg_scale;
        let mut trajs = vec![Trajectory::default(); n];
        for _ in 0..horizon {
            let raw = self.envs.observations().to_vec();
            let x = self.normalized(&raw);
            let mean = self.learner.policy.mean(x.view());
            let values = self.learner.values(x.view());
            let mut actions = Vec::with_capacity(n);
            for i in 0..n {
                let m = mean.row(i);
                let m = m.as_slice().expect("standard layout");
                let a = self.learner.policy.sample(m, &mut self.rng);
                trajs[i].logp.push(log_prob(m, &self.learner.policy.log_std, &a));
                actions.push(a);
            }
            let trans = self.envs.step(&actions)?;
            if let Some((i, t)) = trans.iter().enumerate().find(|(_, t)| t.fault.is_some()) {
                return Err(Error::fault(format!(
                    "environment {i}: {}",
                    t.fault.as_deref().unwrap_or_default()
                )));
            }
            let bonus = self.curiosity_bonus(&trans, rnd_inputs);
            let truncated: Vec<usize> = (0..n).filter(|&i| trans[i].truncated && !trans[i].terminated).collect();
            let mut boot = vec![0.0; n];
            if !truncated.is_empty() {
                let finals: Vec<Vec<f64>> = truncated.iter().map(|&i| trans[i].obs.clone()).collect();
                let v = self.learner.values(self.normalized(&finals).view());
                for (k, &i) in truncated.iter().enumerate() {
                    boot[i] = gamma * v[k];
                }
            }
            let mut step_rewards = Vec::with_capacity(n);
            let mut step_dones = Vec::with_capacity(n);
            for (i, t) in trans.iter().enumerate() {
                let parts = reward_parts(&t.signals, &reward_cfg, self.run.config.mode, bonus[i])?;
                let b = total_reward(&parts, &reward_cfg);
                if !b.r_total.is_finite() {
                    return Err(Error::fault(format!("environment {i}: non-finite reward")));
                }
                let tr = &mut trajs[i];
                tr.obs.push(raw[i].clone());
                tr.act.push(actions[i].clone());
                tr.value.push(values[i]);
                tr.reward.push(b.r_total);
                tr.terms.push(b);
                tr.done.push(t.done());
                tr.bootstrap.push(boot[i]);
                tr.n_stage.push(t.signals.status.n_stage);
                step_rewards.push(b.r_total);
                step_dones.push(t.done());
                self.ep_return[i] += b.r_total;
                if t.done() {
                    self.recent.push_back(Episode {
                        ret: self.ep_return[i],
                        progress: t.signals.status.progress(&self.run.plan),
                        success: t.success,
                    });
                    if self.recent.len() > window {
                        self.recent.pop_front();
                    }
                    self.episodes += 1;
                    self.ep_return[i] = 0.0;
                }
            }
            self.scaler.observe(&step_rewards, &step_dones);
        }
        Ok(trajs)
    }

    fn build_batch(&self, trajs: &[Trajectory]) -> Result<Batch> {
        let ppo = &self.run.config.ppo;
        let scale = self.scaler.scale();
        let last = self.normalized(self.envs.observations());
        let last_v = self.learner.values(last.view());
        let total: usize = trajs.iter().map(|t| t.reward.len()).sum();
        let mut obs_rows = Vec::with_capacity(total);
        let mut act_rows = Vec::with_capacity(total);
        let mut logp = Vec::with_capacity(total);
        let mut adv = Vec::with_capacity(total);
        let mut ret = Vec::with_capacity(total);
        // Ordered by (environment, step).
        for (i, t) in trajs.iter().enumerate() {
            let r: Vec<f64> = t.reward.iter().zip(&t.bootstrap).map(|(r, b)| r * scale + b).collect();
            let (a, g) = compute_gae(&r, &t.value, &t.done, last_v[i], ppo.gamma, ppo.lambda)?;
            obs_rows.extend(t.obs.iter().cloned());
            act_rows.extend(t.act.iter().cloned());
            logp.extend(&t.logp);
            adv.extend(a);
            ret.extend(g);
        }
        normalize(&mut adv);
        let act_dim = self.envs.act_dim();
        let act = Array2::from_shape_vec((total, act_dim), act_rows.concat())
            .map_err(|e| Error::fault(format!("action batch shape: {e}")))?;
        Ok(Batch {
            obs: self.normalized(&obs_rows),
            act,
            logp_old: logp,
            adv,
            ret,
        })
    }

    /// Run one iteration and return its metrics row.
    pub fn iterate(&mut self) -> Result<IterationMetrics> {
        if self.curriculum.randomize() && !self.randomized {
            self.envs.set_randomization(Some(self.run.config.randomization.clone()));
            self.randomized = true;
        }
        let mut rnd_inputs = Vec::new();
        let trajs = self.rollout(&mut rnd_inputs)?;
        let mut batch = self.build_batch(&trajs)?;
        let ppo = self.run.config.ppo.clone();
        if ppo.symmetry {
            let probe = &self.probe;
            batch = symmetry_augment(&batch, &self.learner.policy, |o| probe.mirror_obs(o), |a| probe.mirror_act(a));
        }
        let backup = self.learner.clone();
        let update = match self.learner.update(&batch, &ppo, &mut self.rng) {
            Ok(u) => u,
            Err(e) => {
                self.learner = backup;
                return Err(e);
            }
        };
        if let Some(rnd) = &mut self.rnd {
            if !rnd_inputs.is_empty() {
                let dim = rnd_inputs[0].len();
                let x = Array2::from_shape_vec((rnd_inputs.len(), dim), rnd_inputs.concat())
                    .map_err(|e| Error::fault(format!("rnd batch shape: {e}")))?;
                rnd.update(x.view());
            }
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * batch.len());
        for t in &trajs {
            for o in &t.obs {
                rows.push(o.clone());
                rows.push(self.probe.mirror_obs(o));
            }
        }
        self.obs_norm.update(&rows);

        let steps = trajs.iter().map(|t| t.terms.len()).sum::<usize>().max(1) as f64;
        let mut sums = [0.0; 6];
        for t in &trajs {
            for b in &t.terms {
                for (s, v) in sums.iter_mut().zip(b.values()) {
                    *s += v;
                }
            }
        }
        let m = sums.map(|s| s / steps);
        let terms = RewardBreakdown {
            r_con: m[0],
            r_stage: m[1],
            r_curi: m[2],
            r_reg: m[3],
            r_task: m[4],
            r_total: m[5],
        };
        let k = self.recent.len().max(1) as f64;
        let mean_return = self.recent.iter().map(|e| e.ret).sum::<f64>() / k;
        let metrics = IterationMetrics {
            iteration: self.curriculum.iteration,
            mean_return,
            mean_progress: self.recent.iter().map(|e| e.progress).sum::<f64>() / k,
            mean_curiosity: terms.r_curi,
            reg_scale: self.curriculum.reg_scale,
            phase: self.curriculum.phase,
            terms,
            success_rate: self.recent.iter().filter(|e| e.success).count() as f64 / k,
            episodes: self.episodes,
            update,
            curiosity_buckets: self.curiosity.table.occupied(),
        };
        self.curriculum = self.curriculum.tick(&self.run.config.curriculum, mean_return);
        Ok(metrics)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut config = self.run.config.clone();
        config.seeds = vec![self.seed];
        let text = config.to_toml_string()?;
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            iteration: self.curriculum.iteration,
            seed: self.seed,
            env: self.probe.name().to_string(),
            obs_dim: self.envs.obs_dim(),
            act_dim: self.envs.act_dim(),
            config_hash: config_hash(&text),
            config: text,
            learner: self.learner.clone(),
            obs_norm: self.obs_norm.clone(),
            return_scaler: self.scaler.clone(),
            curiosity: self.curiosity.clone(),
            rnd: self.rnd.clone(),
            rnd_mean: self.rnd_mean.clone(),
            curriculum: self.curriculum.clone(),
        })
    }
}

/// Files written by one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub mode: RewardMode,
    pub dir: PathBuf,
    pub iterations: usize,
    pub final_metrics: IterationMetrics,
}

impl RunSummary {
    pub fn metrics_path(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.dir.join("checkpoint_final.json")
    }
}

/// Train one seed, writing `metrics.csv` (flushed every iteration),
/// `config.toml` (resolved snapshot), periodic checkpoints and
/// `checkpoint_final.json` into `dir`.
///
/// A fault ends the run after writing the final checkpoint (last good
/// parameters) and `fault.json`.
pub fn train(run: &ResolvedRun, seed: u64, dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut trainer = Trainer::new(run, seed)?;
    let mut snapshot = run.config.clone();
    snapshot.seeds = vec![seed];
    let snap_path = dir.join("config.toml");
    std::fs::write(&snap_path, snapshot.to_toml_string()?).map_err(|e| Error::io(&snap_path, e))?;

    let metrics_path = dir.join("metrics.csv");
    let file = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(METRICS_COLUMNS)?;
    writer.flush().map_err(|e| Error::io(&metrics_path, e))?;

    let every = run.config.checkpoint_every;
    let mut last = IterationMetrics::default();
    for it in 0..run.config.iterations {
        let m = match trainer.iterate() {
            Ok(m) => m,
            Err(e) => {
                trainer.checkpoint()?.save(&dir.join("checkpoint_final.json"))?;
                let dump = serde_json::json!({
                    "iteration": it,
                    "seed": seed,
                    "mode": run.config.mode.name(),
                    "phase": trainer.curriculum.phase,
                    "error": e.to_string(),
                });
                let path = dir.join("fault.json");
                std::fs::write(&path, serde_json::to_string_pretty(&dump)?).map_err(|err| Error::io(&path, err))?;
                return Err(e);
            }
        };
        writer.write_record(m.record())?;
        writer.flush().map_err(|e| Error::io(&metrics_path, e))?;
        if it % 10 == 0 || it + 1 == run.config.iterations {
            log::info!(
                "[{} seed {seed}] iter {it}: return {:.2} progress {:.3} phase {}",
                run.config.mode,
                m.mean_return,
                m.mean_progress,
                m.phase
            );
        }
        if every > 0 && (it + 1) % every == 0 {
            trainer.checkpoint()?.save(&dir.join(format!("checkpoint_{:06}.json", it + 1)))?;
        }
        last = m;
    }
    trainer.checkpoint()?.save(&dir.join("checkpoint_final.json"))?;
    Ok(RunSummary {
        seed,
        mode: run.config.mode,
        dir: dir.to_path_buf(),
        iterations: run.config.iterations,
        final_metrics: last,
    })
}
