use serde::{Deserialize, Serialize};

/// Running per-feature mean and variance (parallel Welford merge).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
    pub clip: f64,
}

impl RunningNorm {
    pub fn new(dim: usize, clip: f64) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 1e-4,
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, rows: &[Vec<f64>]) {
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        for j in 0..self.dim() {
            let bm = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let bv = rows.iter().map(|r| (r[j] - bm).powi(2)).sum::<f64>() / n;
            let delta = bm - self.mean[j];
            let total = self.count + n;
            self.mean[j] += delta * n / total;
            let m2 = self.var[j] * self.count + bv * n + delta * delta * self.count * n / total;
            self.var[j] = m2 / total;
        }
        self.count += n;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| ((v - self.mean[j]) / (self.var[j] + 1e-8).sqrt()).clamp(-self.clip, self.clip))
            .collect()
    }
}

/// Scales rewards by the running standard deviation of the discounted
/// return, one accumulator per environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnScaler {
    pub gamma: f64,
    returns: Vec<f64>,
    stats: RunningNorm,
}

impl ReturnScaler {
    pub fn new(n_envs: usize, gamma: f64) -> Self {
        Self {
            gamma,
            returns: vec![0.0; n_envs],
            stats: RunningNorm::new(1, f64::MAX),
        }
    }

    /// Record one step of rewards (one per environment) and episode ends.
    pub fn observe(&mut self, rewards: &[f64], dones: &[bool]) {
        let mut rows = Vec::with_capacity(rewards.len());
        for (i, (&r, &d)) in rewards.iter().zip(dones).enumerate() {
            self.returns[i] = self.returns[i] * self.gamma + r;
            rows.push(vec![self.returns[i]]);
            if d {
                self.returns[i] = 0.0;
            }
        }
        self.stats.update(&rows);
    }

    pub fn scale(&self) -> f64 {
        1.0 / (self.stats.var[0] + 1e-8).sqrt().max(1e-4)
    }
}
