//! Miniature ablation: every reward mode for two seeds at a small budget.
use contact_rl::config::RunConfig;
use contact_rl::experiment::ablate;
use contact_rl::rewards::RewardMode;

fn main() -> contact_rl::Result<()> {
    let overrides = [("iterations", "40"), ("seeds", "[0, 1]")].map(|(k, v)| (k.to_string(), v.to_string()));
    let config = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hopper.toml"), &overrides)?;
    let modes = [RewardMode::Full, RewardMode::NoStage, RewardMode::ZeroOne, RewardMode::NoCuriosity];
    let summary = ablate(&config, &modes, &std::env::temp_dir().join("contact-rl-ablation-example"))?;
    for row in &summary.rows {
        println!("{:>13} seed {}: progress {:.3}", row.mode, row.seed, row.final_progress);
    }
    for m in modes {
        println!("{:>13} median {:.3}", m, summary.median(m).unwrap_or(f64::NAN));
    }
    Ok(())
}
