mod common;

use common::{gae_oracle, policy_gradient_error, HOPPER_CONFIG};
use contact_rl::config::RunConfig;
use contact_rl::trainer::{compute_gae, train, Checkpoint, CurriculumConfig, CurriculumState};
use proptest::prelude::*;

fn short_run(iterations: usize) -> contact_rl::config::ResolvedRun {
    let ov = vec![
        ("iterations".to_string(), iterations.to_string()),
        ("seeds".to_string(), "[3]".to_string()),
        ("ppo.num_envs".to_string(), "4".to_string()),
        ("ppo.horizon".to_string(), "16".to_string()),
    ];
    RunConfig::load(HOPPER_CONFIG, &ov).unwrap().resolve().unwrap()
}

proptest! {
    #[test]
    fn gae_matches_explicit_sums(
        steps in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, prop::bool::weighted(0.2)), 1..40),
        bootstrap in -5.0f64..5.0,
        gamma in 0.8f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let r: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let v: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let d: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = compute_gae(&r, &v, &d, bootstrap, gamma, lambda).unwrap();
        let expect = gae_oracle(&r, &v, &d, bootstrap, gamma, lambda);
        for t in 0..r.len() {
            prop_assert!((adv[t] - expect[t]).abs() < 1e-8);
            prop_assert!((ret[t] - (expect[t] + v[t])).abs() < 1e-8);
        }
    }

    #[test]
    fn reg_scale_never_exceeds_its_cap(returns in prop::collection::vec(-10.0f64..10.0, 1..400)) {
        let config = CurriculumConfig { phase1_max: Some(3), phase2_max: Some(3), reg_interval: 7, ..Default::default() };
        let mut s = CurriculumState::new(&config);
        let cap = 1.0 + config.reg_step * config.reg_max_steps as f64;
        for r in returns {
            s = s.tick(&config, r);
            prop_assert!(s.reg_scale >= 1.0 && s.reg_scale <= cap + 1e-12);
            prop_assert_eq!(s.curiosity_multiplier() == 1.0, s.phase == 1);
        }
    }
}

#[test]
fn policy_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let err = policy_gradient_error(seed, 6, 3, &[8, 8], 16, true);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn checkpoint_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let run = short_run(2);
    let summary = train(&run, 3, dir.path()).unwrap();
    let ckpt = Checkpoint::load(&summary.checkpoint_path()).unwrap();
    assert_eq!(ckpt.iteration, 2);
    let again = dir.path().join("copy.json");
    ckpt.save(&again).unwrap();
    assert_eq!(Checkpoint::load(&again).unwrap(), ckpt);
}

#[test]
fn tampered_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train(&short_run(1), 3, dir.path()).unwrap();
    let path = summary.checkpoint_path();
    let text = std::fs::read_to_string(&path).unwrap().replace("w_curi = 500.0", "w_curi = 501.0");
    std::fs::write(&path, text).unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

#[test]
fn identical_runs_write_identical_metrics() {
    let run = short_run(3);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = train(&run, 3, a.path()).unwrap();
    let sb = train(&run, 3, b.path()).unwrap();
    assert_eq!(std::fs::read(sa.metrics_path()).unwrap(), std::fs::read(sb.metrics_path()).unwrap());
}

#[test]
fn different_seeds_diverge() {
    let run = short_run(2);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = train(&run, 3, a.path()).unwrap();
    let sb = train(&run, 4, b.path()).unwrap();
    assert_ne!(std::fs::read(sa.metrics_path()).unwrap(), std::fs::read(sb.metrics_path()).unwrap());
}
