//! Step a hopper and its mirror image with mirrored actions; the two stay
//! exact reflections of each other.
use contact_rl::envs::{Environment, HopperConfig, HopperEnv};
use contact_rl::stage::StagePlan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> contact_rl::Result<()> {
    let plan = StagePlan::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hopper_stones.plan.toml"))?;
    let mut env = HopperEnv::new(HopperConfig::default(), plan)?;
    let obs = env.reset(3);
    assert_eq!(env.mirror_obs(&env.mirror_obs(&obs)), obs);
    let mut twin = env.mirrored()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for step in 0..200 {
        let a: Vec<f64> = (0..env.act_dim()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let t = env.step(&a);
        let tm = twin.step(&env.mirror_act(&a));
        let dev = env.mirror_obs(&t.obs).iter().zip(&tm.obs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
        if t.done() {
            println!("episode ended after {} steps", step + 1);
            break;
        }
    }
    println!("largest observation mismatch: {worst:e}");
    Ok(())
}
