//! Hash observations into buckets and watch the visit bonus decay.
use contact_rl::curiosity::{bin2dec, curiosity_reward, HashNetwork, VisitTable};

fn main() {
    println!("outputs [1.5, -0.2, 0.4] -> bucket {}", bin2dec(&[1.5, -0.2, 0.4]));

    let net = HashNetwork::new(3, 7);
    let mut table = VisitTable::default();
    let seen = [0.1, 0.5, -0.3];
    for n in 1..=5 {
        let r = curiosity_reward(&seen, &net, &mut table, true);
        println!("visit {n}: bucket {:>5} bonus {r:.4}", net.bucket_id(&seen));
    }
    let novel = [2.0, -1.5, 0.8];
    println!("novel state: bucket {:>5} bonus {:.4}", net.bucket_id(&novel), curiosity_reward(&novel, &net, &mut table, true));
    println!("{} buckets occupied after {} visits", table.occupied(), table.total());
}
