//! Train briefly, then roll the checkpoint out with mean actions.
use contact_rl::config::RunConfig;
use contact_rl::experiment::{evaluate, EvalOptions};
use contact_rl::trainer::{train, Checkpoint};

fn main() -> contact_rl::Result<()> {
    let config = RunConfig::load(
        concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hopper.toml"),
        &[("iterations".into(), "20".into())],
    )?;
    let run = config.resolve()?;
    let dir = tempfile_dir();
    let summary = train(&run, 0, &dir)?;
    let ckpt = Checkpoint::load(&summary.checkpoint_path())?;
    let report = evaluate(&ckpt, &EvalOptions { episodes: 5, ..Default::default() })?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    std::env::temp_dir().join("contact-rl-eval-example")
}
