//! Per-episode dynamics drawn from the randomization intervals.
use contact_rl::envs::RandomizationConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let config = RandomizationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!("{:>8} {:>6} {:>6} {:>6} {:>5}", "friction", "mass", "kp", "kd", "delay");
    for _ in 0..8 {
        let d = config.sample(&mut rng, 0.02);
        println!(
            "{:>8.3} {:>6.3} {:>6.3} {:>6.3} {:>5}",
            d.friction, d.mass_scale, d.kp_scale, d.kd_scale, d.delay_steps
        );
    }
}
