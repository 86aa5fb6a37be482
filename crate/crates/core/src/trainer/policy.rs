use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::{Activation, Mlp};

/// Diagonal Gaussian policy with a state-independent log standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub actor: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], init_std: f64, rng: &mut R) -> Self {
        let sizes: Vec<usize> = std::iter::once(obs_dim).chain(hidden.iter().copied()).chain([act_dim]).collect();
        Self {
            actor: Mlp::new(&sizes, Activation::Elu, 2f64.sqrt(), 0.01, rng),
            log_std: vec![init_std.ln(); act_dim],
        }
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean(&self, obs: ArrayView2<f64>) -> Array2<f64> {
        self.actor.forward(obs)
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64> {
        mean.iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let e: f64 = rng.sample(StandardNormal);
                m + ls.exp() * e
            })
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (1.0 + (2.0 * PI).ln())).sum()
    }
}

pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let mut lp = 0.0;
    for i in 0..mean.len() {
        let z = (action[i] - mean[i]) / log_std[i].exp();
        lp += -0.5 * z * z - log_std[i] - 0.5 * (2.0 * PI).ln();
    }
    lp
}

/// Value network.
pub fn critic<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Mlp {
    let sizes: Vec<usize> = std::iter::once(obs_dim).chain(hidden.iter().copied()).chain([1]).collect();
    Mlp::new(&sizes, Activation::Elu, 2f64.sqrt(), 1.0, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_prob_matches_closed_form() {
        let lp = log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let lp = log_prob(&[1.0, -1.0], &[0.5f64.ln(), 0.0], &[2.0, 0.0]);
        let expect = (-0.5 * 4.0 - 0.5f64.ln() - 0.5 * (2.0 * PI).ln()) + (-0.5 - 0.5 * (2.0 * PI).ln());
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn samples_have_requested_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GaussianPolicy::new(3, 1, &[8], 0.5, &mut rng);
        let xs: Vec<f64> = (0..20000).map(|_| p.sample(&[1.0], &mut rng)[0]).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!((m - 1.0).abs() < 0.02 && (s - 0.5).abs() < 0.02);
    }
}
