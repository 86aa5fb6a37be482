//! Short hopper training run; pass the iteration count as the first argument.
use contact_rl::config::RunConfig;
use contact_rl::trainer::train;

fn main() -> contact_rl::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let iterations = std::env::args().nth(1).unwrap_or_else(|| "30".into());
    let config = RunConfig::load(
        concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hopper.toml"),
        &[("iterations".into(), iterations)],
    )?;
    let run = config.resolve()?;
    let out = std::env::temp_dir().join("contact-rl-example");
    let summary = train(&run, 0, &run.run_dir(&out, 0))?;
    let m = &summary.final_metrics;
    println!("progress {:.3} return {:.1} -> {}", m.mean_progress, m.mean_return, summary.dir.display());
    Ok(())
}
