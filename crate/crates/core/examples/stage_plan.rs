//! Walk a stage plan by hand: place feet, score contacts, advance stages.
use contact_rl::stage::{advance, evaluate_contacts, ObservedContact, Pose2, StagePlan, StageStatus};

fn main() -> contact_rl::Result<()> {
    let plan = StagePlan::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hopper_stones.plan.toml"))?;
    let base = Pose2::default();
    let foot = |x: f64, down: bool| ObservedContact { in_contact: down, position: [x, 0.0] };
    // Left and right foot positions, one row per step.
    let script = [
        (0.0, 0.1, true, true),
        (0.45, 0.45, true, true),
        (0.45, 0.85, true, true),
        (0.85, 0.85, true, true),
        (0.85, 1.25, true, true),
        (1.25, 1.25, true, true),
    ];
    let mut status = StageStatus::default();
    for (l, r, dl, dr) in script {
        let goal = plan.stage(status.n_stage.min(plan.len() - 1)).contact_goal();
        let eval = evaluate_contacts(&[("left_foot", foot(l, dl)), ("right_foot", foot(r, dr))], &goal, &base)?;
        status.n_corr = eval.n_corr;
        status.n_wrong = eval.n_wrong;
        status = advance(status, eval.fulfilled, true, &plan);
        println!(
            "feet ({l:.2}, {r:.2}): correct {} wrong {} -> stage {} of {} (progress {:.2})",
            eval.n_corr,
            eval.n_wrong,
            status.n_stage,
            plan.len(),
            status.progress(&plan)
        );
    }
    Ok(())
}
