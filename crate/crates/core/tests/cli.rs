mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::HOPPER_CONFIG;

fn cli(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_contact-rl"));
    cmd.args(args).env("RUST_LOG", "warn");
    match out_env {
        Some(p) => cmd.env("CONTACT_RL_OUT", p),
        None => cmd.env_remove("CONTACT_RL_OUT"),
    };
    cmd.output().unwrap()
}

const QUICK: [&str; 6] = [
    "--override",
    "iterations=1",
    "--override",
    "ppo.num_envs=4",
    "--override",
    "ppo.horizon=16",
];

fn train_quick(root: &Path) -> std::path::PathBuf {
    let mut args = vec!["train", "--config", HOPPER_CONFIG, "--seed", "2", "--out", root.to_str().unwrap()];
    args.extend(QUICK);
    let out = cli(&args, None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    root.join("hopper-stones/full/seed-2")
}

#[test]
fn selftest_passes() {
    let out = cli(&["selftest"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5 && !text.contains("FAIL"));
}

#[test]
fn missing_plan_is_a_config_error() {
    let out = cli(&["train", "--config", HOPPER_CONFIG, "--override", "plan=\"nowhere.toml\""], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_and_bad_mode_are_config_errors() {
    let out = cli(&["train", "--config", HOPPER_CONFIG, "--override", "ppo.bogus=1"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["train", "--config", HOPPER_CONFIG, "--mode", "half"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overrides_land_in_the_snapshot() {
    let root = tempfile::tempdir().unwrap();
    let dir = train_quick(root.path());
    let snap = std::fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(snap.contains("num_envs = 4") && snap.contains("iterations = 1") && snap.contains("seeds = [2]"));
}

#[test]
fn output_root_comes_from_the_environment() {
    let root = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--config", HOPPER_CONFIG, "--seed", "0", "--mode", "zero-one"];
    args.extend(QUICK);
    let out = cli(&args, Some(root.path()));
    assert!(out.status.success());
    assert!(root.path().join("hopper-stones/zero-one/seed-0/metrics.csv").exists());
}

#[test]
fn eval_of_an_untrained_policy_is_deterministic_and_makes_no_progress() {
    let root = tempfile::tempdir().unwrap();
    let dir = train_quick(root.path());
    let ckpt = dir.join("checkpoint_final.json");
    let report = |sub: &str| {
        let out_dir = root.path().join(sub);
        let out = cli(
            &["eval", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "4", "--seed", "5", "--out", out_dir.to_str().unwrap()],
            None,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read_to_string(out_dir.join("eval.json")).unwrap(), out_dir)
    };
    let (a, dir_a) = report("a");
    let (b, _) = report("b");
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    for key in ["mean_progress", "success_rate", "mean_return", "mean_length", "reward_terms", "episodes"] {
        assert!(v.get(key).is_some(), "report lacks {key}");
    }
    assert!(v["mean_progress"].as_f64().unwrap() < 0.1);
    assert!(dir_a.join("trajectory.csv").exists());
}

#[test]
fn missing_checkpoint_is_a_fault() {
    let out = cli(&["eval", "--checkpoint", "/nonexistent/ckpt.json"], None);
    assert_eq!(out.status.code(), Some(3));
}
