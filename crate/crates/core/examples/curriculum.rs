//! The three-phase schedule: exploration, then randomization, then a
//! stepwise rise of the regularization scale.
use contact_rl::trainer::{CurriculumConfig, CurriculumState};

fn main() {
    let config = CurriculumConfig {
        phase1_max: Some(5),
        phase2_max: Some(5),
        reg_interval: 4,
        ..Default::default()
    };
    let mut s = CurriculumState::new(&config);
    for _ in 0..40 {
        s = s.tick(&config, 1.0);
        println!(
            "iter {:>2}: phase {} curiosity x{} randomize {} reg scale {:.1}",
            s.iteration,
            s.phase,
            s.curiosity_multiplier(),
            s.randomize(),
            s.reg_scale
        );
    }
}
