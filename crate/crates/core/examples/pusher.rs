//! Drive the pusher straight ahead and print the reward terms per step.
use contact_rl::config::RunConfig;
use contact_rl::rewards::{reward_parts, total_reward, RewardMode};

fn main() -> contact_rl::Result<()> {
    let run = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/pusher.toml"), &[])?.resolve()?;
    let mut env = run.config.env.build(&run.plan)?;
    env.reset(0);
    let mut action = vec![0.0; env.act_dim()];
    action[0] = 0.6;
    for step in 0..150 {
        let t = env.step(&action);
        let r = total_reward(&reward_parts(&t.signals, &run.rewards, RewardMode::Full, 0.0)?, &run.rewards);
        if step % 15 == 0 || t.done() {
            let s = t.signals.status;
            println!(
                "step {step:>3}: stage {} correct {} wrong {} r_con {:>5.1} r_task {:>7.2} total {:>8.2}",
                s.n_stage, s.n_corr, s.n_wrong, r.r_con, r.r_task, r.r_total
            );
        }
        if t.done() {
            break;
        }
    }
    Ok(())
}
