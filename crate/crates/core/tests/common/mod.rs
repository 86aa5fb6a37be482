//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use contact_rl::envs::{Environment, HopperConfig, HopperEnv};
use contact_rl::stage::StagePlan;
use contact_rl::trainer::{log_prob, policy_loss_grad, GaussianPolicy};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HOPPER_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hopper.toml");
pub const HOPPER_PLAN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hopper_stones.plan.toml");

/// Advantages as explicit truncated sums of discounted TD errors.
pub fn gae_oracle(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let v = |k: usize| if k == n { bootstrap } else { values[k] };
    let delta = |k: usize| rewards[k] + if dones[k] { 0.0 } else { gamma * v(k + 1) } - values[k];
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for k in t..n {
                sum += w * delta(k);
                if dones[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Bucket id by summing powers of two for positive outputs.
pub fn bucket_oracle(outputs: &[f64]) -> u64 {
    let k = outputs.len();
    outputs
        .iter()
        .enumerate()
        .filter(|(_, &y)| y > 0.0)
        .map(|(i, _)| 2u64.pow((k - 1 - i) as u32))
        .sum()
}

/// Largest relative error between the analytic policy-loss gradient and
/// central differences on one random batch. With `log_std` the standard
/// deviation parameters are checked too; otherwise only the mean network.
pub fn policy_gradient_error(seed: u64, obs_dim: usize, act_dim: usize, hidden: &[usize], n: usize, log_std: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = GaussianPolicy::new(obs_dim, act_dim, hidden, 0.5, &mut rng);
    for s in policy.actor.param_slices_mut() {
        for w in s.iter_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
    }
    let obs = Array2::from_shape_fn((n, obs_dim), |_| rng.random_range(-1.0..1.0));
    let act = Array2::from_shape_fn((n, act_dim), |_| rng.random_range(-1.0..1.0));
    let mean = policy.mean(obs.view());
    // Old log-probabilities spread the ratios across both sides of the clip range.
    let logp_old: Vec<f64> = (0..n)
        .map(|i| log_prob(&mean.row(i).to_vec(), &policy.log_std, &act.row(i).to_vec()) + rng.random_range(-0.4..0.4))
        .collect();
    let adv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (clip, ent) = (0.2, 0.01);
    let loss = |p: &GaussianPolicy| policy_loss_grad(p, obs.view(), act.view(), &logp_old, &adv, clip, ent).loss;
    let g = policy_loss_grad(&policy, obs.view(), act.view(), &logp_old, &adv, clip, ent);
    let mut analytic: Vec<f64> = g.actor.slices().concat();
    let n_actor = analytic.len();
    if log_std {
        analytic.extend(&g.log_std);
    }

    let h = 1e-6;
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|idx| {
            let bump = |d: f64| {
                let mut p = policy.clone();
                if idx < n_actor {
                    let mut k = idx;
                    for s in p.actor.param_slices_mut() {
                        if k < s.len() {
                            s[k] += d;
                            break;
                        }
                        k -= s.len();
                    }
                } else {
                    p.log_std[idx - n_actor] += d;
                }
                loss(&p)
            };
            (bump(h) - bump(-h)) / (2.0 * h)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale < 1e-9 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

pub fn hopper_env() -> HopperEnv {
    let plan = StagePlan::load(HOPPER_PLAN).unwrap();
    HopperEnv::new(HopperConfig::default(), plan).unwrap()
}

/// Step an environment and its mirror image with mirrored actions for
/// `steps` control steps in total, resetting both after each episode, and
/// return the largest deviation between mirrored observations. Any mismatch
/// in stage bookkeeping or episode ends counts as infinite.
pub fn paired_rollout_deviation<E: Environment>(
    env: &mut E,
    mirror: impl Fn(&E) -> E,
    steps: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episode = 0;
    env.reset(seed);
    let mut mirrored = mirror(env);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let a: Vec<f64> = (0..env.act_dim()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let t = env.step(&a);
        let tm = mirrored.step(&env.mirror_act(&a));
        for (x, y) in env.mirror_obs(&t.obs).iter().zip(&tm.obs) {
            worst = worst.max((x - y).abs());
        }
        let (s, sm) = (t.signals.status, tm.signals.status);
        if (s.n_stage, s.n_corr, s.n_wrong, s.f_con) != (sm.n_stage, sm.n_corr, sm.n_wrong, sm.f_con)
            || (t.terminated, t.truncated) != (tm.terminated, tm.truncated)
        {
            return f64::INFINITY;
        }
        if t.done() {
            episode += 1;
            env.reset(seed + episode);
            mirrored = mirror(env);
        }
    }
    worst
}
