//! Per-episode dynamics randomization and timed pushes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    pub friction: [f64; 2],
    /// Multiplier on default masses.
    pub mass_scale: [f64; 2],
    pub kp_scale: [f64; 2],
    pub kd_scale: [f64; 2],
    /// Control delay in milliseconds, quantized to whole control steps.
    pub delay_ms: [f64; 2],
    pub push_interval_s: f64,
    /// Largest velocity change per push (m/s).
    pub push_dv: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            friction: [0.2, 1.1],
            mass_scale: [0.7, 1.3],
            kp_scale: [0.75, 1.25],
            kd_scale: [0.75, 1.25],
            delay_ms: [0.0, 20.0],
            push_interval_s: 5.0,
            push_dv: 0.25,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::config(format!("randomization range `{name}` {r:?} is not an interval")));
    }
    Ok(())
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

impl RandomizationConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("friction", self.friction)?;
        check_range("mass_scale", self.mass_scale)?;
        check_range("kp_scale", self.kp_scale)?;
        check_range("kd_scale", self.kd_scale)?;
        check_range("delay_ms", self.delay_ms)?;
        if self.friction[0] < 0.0 || self.mass_scale[0] <= 0.0 || self.delay_ms[0] < 0.0 {
            return Err(Error::config("friction, mass scale and delay must be non-negative"));
        }
        if !(self.push_interval_s > 0.0) || !(self.push_dv >= 0.0) {
            return Err(Error::config("push interval must be > 0 and push_dv >= 0"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, control_dt: f64) -> DynamicsSample {
        let delay_ms = uniform(rng, self.delay_ms);
        DynamicsSample {
            friction: uniform(rng, self.friction),
            mass_scale: uniform(rng, self.mass_scale),
            kp_scale: uniform(rng, self.kp_scale),
            kd_scale: uniform(rng, self.kd_scale),
            delay_steps: (delay_ms / (1000.0 * control_dt)).round() as usize,
            push_interval_steps: Some((self.push_interval_s / control_dt).round().max(1.0) as usize),
            push_dv: self.push_dv,
        }
    }
}

/// Dynamics parameters in force for one episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSample {
    pub friction: f64,
    pub mass_scale: f64,
    pub kp_scale: f64,
    pub kd_scale: f64,
    pub delay_steps: usize,
    /// `None` disables pushes.
    pub push_interval_steps: Option<usize>,
    pub push_dv: f64,
}

impl DynamicsSample {
    pub fn nominal(friction: f64) -> Self {
        Self {
            friction,
            mass_scale: 1.0,
            kp_scale: 1.0,
            kd_scale: 1.0,
            delay_steps: 0,
            push_interval_steps: None,
            push_dv: 0.0,
        }
    }
}

/// Fires once every `interval` control steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PushTimer {
    interval: Option<usize>,
    elapsed: usize,
}

impl PushTimer {
    pub fn new(interval: Option<usize>) -> Self {
        Self { interval, elapsed: 0 }
    }

    pub fn tick(&mut self) -> bool {
        match self.interval {
            None => false,
            Some(n) => {
                self.elapsed += 1;
                if self.elapsed >= n {
                    self.elapsed = 0;
                    true
                } else {
                    false
                }
            }
        }
    }
}

/// Random planar velocity kick with magnitude at most `dv`.
pub fn apply_push<R: Rng + ?Sized>(velocity: [f64; 2], dv: f64, rng: &mut R) -> [f64; 2] {
    if dv == 0.0 {
        return velocity;
    }
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let mag = rng.random_range(0.0..=dv);
    [velocity[0] + mag * angle.cos(), velocity[1] + mag * angle.sin()]
}

/// Horizontal-only kick for side-view worlds.
pub fn apply_horizontal_push<R: Rng + ?Sized>(vx: f64, dv: f64, rng: &mut R) -> f64 {
    if dv == 0.0 {
        return vx;
    }
    vx + rng.random_range(-dv..=dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_stay_in_range() {
        let cfg = RandomizationConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            let s = cfg.sample(&mut rng, 0.02);
            assert!((0.2..=1.1).contains(&s.friction));
            assert!((0.7..=1.3).contains(&s.mass_scale));
            assert!((0.75..=1.25).contains(&s.kp_scale));
            assert!(s.delay_steps <= 1);
            assert_eq!(s.push_interval_steps, Some(250));
        }
    }

    #[test]
    fn zero_push_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(apply_push([0.3, -0.1], 0.0, &mut rng), [0.3, -0.1]);
        assert_eq!(apply_horizontal_push(0.3, 0.0, &mut rng), 0.3);
    }

    #[test]
    fn push_magnitude_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let v = apply_push([0.0, 0.0], 0.25, &mut rng);
            assert!(v[0].hypot(v[1]) <= 0.25 + 1e-15);
            assert!(apply_horizontal_push(0.0, 0.25, &mut rng).abs() <= 0.25);
        }
    }

    #[test]
    fn timer_fires_on_schedule() {
        let mut t = PushTimer::new(Some(3));
        let fired: Vec<bool> = (0..7).map(|_| t.tick()).collect();
        assert_eq!(fired, [false, false, true, false, false, true, false]);
        assert!(!PushTimer::new(None).tick());
    }

    #[test]
    fn bad_ranges_are_rejected() {
        let cfg = RandomizationConfig {
            friction: [1.0, 0.5],
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().is_config());
        RandomizationConfig::default().validate().unwrap();
    }
}
