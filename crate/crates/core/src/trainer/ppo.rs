use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{log_prob, GaussianPolicy};
use crate::error::{Error, Result};
use crate::nn::{Adam, Mlp, MlpGrads};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub clip: f64,
    pub learning_rate: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub horizon: usize,
    pub num_envs: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub init_std: f64,
    /// Adapt the learning rate toward this KL divergence per minibatch;
    /// 0 keeps it fixed.
    pub desired_kl: f64,
    /// Double every batch with mirrored samples.
    pub symmetry: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 64],
            critic_hidden: vec![128, 64],
            clip: 0.2,
            learning_rate: 3e-4,
            gamma: 0.99,
            lambda: 0.95,
            epochs: 5,
            minibatches: 4,
            horizon: 32,
            num_envs: 256,
            entropy_coef: 0.0,
            max_grad_norm: 1.0,
            init_std: 0.5,
            desired_kl: 0.01,
            symmetry: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::config("gamma and lambda must lie in (0, 1]"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::config("clip ratio must be > 0"));
        }
        if self.epochs == 0 || self.minibatches == 0 || self.horizon == 0 || self.num_envs == 0 {
            return Err(Error::config("epochs, minibatches, horizon and num_envs must be >= 1"));
        }
        if !(self.desired_kl >= 0.0) {
            return Err(Error::config("desired_kl must be >= 0"));
        }
        if !(self.learning_rate > 0.0) || !(self.init_std > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::config("learning rate, init_std and max_grad_norm must be > 0"));
        }
        Ok(())
    }
}

/// Training samples with observations already normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub act: Array2<f64>,
    pub logp_old: Vec<f64>,
    pub adv: Vec<f64>,
    pub ret: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.logp_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp_old.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            obs: self.obs.select(Axis(0), idx),
            act: self.act.select(Axis(0), idx),
            logp_old: idx.iter().map(|&i| self.logp_old[i]).collect(),
            adv: idx.iter().map(|&i| self.adv[i]).collect(),
            ret: idx.iter().map(|&i| self.ret[i]).collect(),
        }
    }
}

pub struct SurrogateOut {
    /// Mean of `-min(r A, clip(r) A)`.
    pub loss: f64,
    /// d loss / d logp per sample.
    pub grad_logp: Vec<f64>,
    pub clip_frac: f64,
    pub approx_kl: f64,
}

pub fn clipped_surrogate(logp: &[f64], logp_old: &[f64], adv: &[f64], clip: f64) -> SurrogateOut {
    let n = logp.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; logp.len()];
    let mut clipped = 0usize;
    let mut kl = 0.0;
    for i in 0..logp.len() {
        let r = (logp[i] - logp_old[i]).exp();
        let unclipped = r * adv[i];
        let bounded = r.clamp(1.0 - clip, 1.0 + clip) * adv[i];
        if unclipped <= bounded {
            loss -= unclipped;
            grad[i] = -unclipped / n;
        } else {
            loss -= bounded;
            clipped += 1;
        }
        kl += (r - 1.0) - (logp[i] - logp_old[i]);
    }
    SurrogateOut {
        loss: loss / n,
        grad_logp: grad,
        clip_frac: clipped as f64 / n,
        approx_kl: kl / n,
    }
}

pub struct PolicyGrads {
    pub actor: MlpGrads,
    pub log_std: Vec<f64>,
    pub loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
}

/// Clipped-surrogate loss minus the entropy bonus, with its gradient.
pub fn policy_loss_grad(
    policy: &GaussianPolicy,
    obs: ArrayView2<f64>,
    act: ArrayView2<f64>,
    logp_old: &[f64],
    adv: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> PolicyGrads {
    let cache = policy.actor.forward_cached(obs);
    let mean = cache.output();
    let n = obs.nrows();
    let d = policy.act_dim();
    let logp: Vec<f64> = (0..n)
        .map(|i| {
            log_prob(
                mean.row(i).as_slice().expect("standard layout"),
                &policy.log_std,
                act.row(i).to_slice().expect("standard layout"),
            )
        })
        .collect();
    let s = clipped_surrogate(&logp, logp_old, adv, clip);
    let mut grad_mean = Array2::<f64>::zeros((n, d));
    let mut grad_log_std = vec![-entropy_coef; d];
    for i in 0..n {
        let g = s.grad_logp[i];
        if g == 0.0 {
            continue;
        }
        for j in 0..d {
            let var = (2.0 * policy.log_std[j]).exp();
            let diff = act[[i, j]] - mean[[i, j]];
            grad_mean[[i, j]] = g * diff / var;
            grad_log_std[j] += g * (diff * diff / var - 1.0);
        }
    }
    let entropy = policy.entropy();
    PolicyGrads {
        actor: policy.actor.backward(&cache, grad_mean.view()),
        log_std: grad_log_std,
        loss: s.loss - entropy_coef * entropy,
        entropy,
        clip_frac: s.clip_frac,
        approx_kl: s.approx_kl,
    }
}

/// Mean of `0.5 (V - R)^2` and its gradient.
pub fn value_loss_grad(critic: &Mlp, obs: ArrayView2<f64>, ret: &[f64]) -> (f64, MlpGrads) {
    let cache = critic.forward_cached(obs);
    let v = cache.output();
    let n = obs.nrows().max(1) as f64;
    let mut grad = Array2::<f64>::zeros((obs.nrows(), 1));
    let mut loss = 0.0;
    for i in 0..obs.nrows() {
        let e = v[[i, 0]] - ret[i];
        loss += 0.5 * e * e;
        grad[[i, 0]] = e / n;
    }
    (loss / n, critic.backward(&cache, grad.view()))
}

fn clip_norm(grads: &mut MlpGrads, extra: &mut [f64], max_norm: f64) {
    let norm = (grads.sq_norm() + extra.iter().map(|x| x * x).sum::<f64>()).sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        grads.scale(k);
        extra.iter_mut().for_each(|x| *x *= k);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub learning_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

/// Actor, critic and their optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
}

impl Learner {
    pub fn new(policy: GaussianPolicy, critic: Mlp, learning_rate: f64) -> Self {
        Self {
            policy,
            critic,
            actor_opt: Adam::new(learning_rate),
            critic_opt: Adam::new(learning_rate),
        }
    }

    pub fn values(&self, obs: ArrayView2<f64>) -> Vec<f64> {
        self.critic.forward(obs).column(0).to_vec()
    }

    /// Several epochs of shuffled minibatch steps.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, config: &PpoConfig, rng: &mut R) -> Result<UpdateStats> {
        let n = batch.len();
        let mb = config.minibatches.min(n.max(1));
        let mut idx: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats::default();
        let mut count = 0.0;
        for _ in 0..config.epochs {
            idx.shuffle(rng);
            for chunk in idx.chunks(n.div_ceil(mb)) {
                let b = batch.select(chunk);
                let mut pg = policy_loss_grad(
                    &self.policy,
                    b.obs.view(),
                    b.act.view(),
                    &b.logp_old,
                    &b.adv,
                    config.clip,
                    config.entropy_coef,
                );
                let (vloss, mut vg) = value_loss_grad(&self.critic, b.obs.view(), &b.ret);
                if !pg.loss.is_finite() || !vloss.is_finite() {
                    return Err(Error::fault(format!(
                        "non-finite loss (policy {}, value {vloss})",
                        pg.loss
                    )));
                }
                if config.desired_kl > 0.0 {
                    let target = config.desired_kl;
                    let lr = self.actor_opt.lr;
                    let lr = if pg.approx_kl > 2.0 * target {
                        (lr / 1.5).max(1e-5)
                    } else if pg.approx_kl < 0.5 * target {
                        (lr * 1.5).min(1e-2)
                    } else {
                        lr
                    };
                    self.actor_opt.lr = lr;
                    self.critic_opt.lr = lr;
                }
                clip_norm(&mut pg.actor, &mut pg.log_std, config.max_grad_norm);
                clip_norm(&mut vg, &mut [], config.max_grad_norm);

                let mut grads = pg.actor.slices();
                grads.push(&pg.log_std);
                let mut params = self.policy.actor.param_slices_mut();
                params.push(&mut self.policy.log_std);
                self.actor_opt.step(&mut params, &grads);
                self.critic_opt.step(&mut self.critic.param_slices_mut(), &vg.slices());

                stats.policy_loss += pg.loss;
                stats.value_loss += vloss;
                stats.entropy += pg.entropy;
                stats.approx_kl += pg.approx_kl;
                stats.clip_frac += pg.clip_frac;
                count += 1.0;
            }
        }
        if !self.policy.actor.is_finite() || !self.critic.is_finite() {
            return Err(Error::fault("network parameters became non-finite"));
        }
        stats.policy_loss /= count;
        stats.value_loss /= count;
        stats.entropy /= count;
        stats.approx_kl /= count;
        stats.clip_frac /= count;
        stats.learning_rate = self.actor_opt.lr;
        Ok(stats)
    }
}
