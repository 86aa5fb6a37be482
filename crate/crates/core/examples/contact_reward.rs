//! Dense contact reward versus the zero-one baseline for a two-foot stage.
use contact_rl::rewards::{contact_reward, zero_one_reward, Preset, RewardConfig};

fn main() {
    let n_con = 2;
    let c01 = RewardConfig::from_preset(Preset::Parkour, n_con).c01();
    println!("{:>6} {:>7} {:>7} {:>7} {:>9}", "n_corr", "n_wrong", "n_stage", "dense", "zero-one");
    for (n_corr, n_wrong, n_stage) in [(0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1), (0, 2, 1), (2, 0, 1)] {
        let f_con = n_corr == n_con;
        println!(
            "{n_corr:>6} {n_wrong:>7} {n_stage:>7} {:>7} {:>9}",
            contact_reward(n_corr, n_wrong, n_con, n_stage, f_con, true),
            zero_one_reward(f_con, true, c01)
        );
    }
}
