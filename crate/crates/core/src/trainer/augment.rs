use ndarray::Array2;

use super::policy::{log_prob, GaussianPolicy};
use super::ppo::Batch;

/// Append the mirror image of every sample.
///
/// Advantages and returns are shared with the original; the old
/// log-probability is re-evaluated for the mirrored action under the
/// mirrored observation, using the same (pre-update) policy.
pub fn symmetry_augment(
    batch: &Batch,
    policy: &GaussianPolicy,
    mirror_obs: impl Fn(&[f64]) -> Vec<f64>,
    mirror_act: impl Fn(&[f64]) -> Vec<f64>,
) -> Batch {
    let n = batch.len();
    let (od, ad) = (batch.obs.ncols(), batch.act.ncols());
    let mut obs = Array2::<f64>::zeros((2 * n, od));
    let mut act = Array2::<f64>::zeros((2 * n, ad));
    obs.slice_mut(ndarray::s![..n, ..]).assign(&batch.obs);
    act.slice_mut(ndarray::s![..n, ..]).assign(&batch.act);
    for i in 0..n {
        let o = mirror_obs(batch.obs.row(i).as_slice().expect("standard layout"));
        let a = mirror_act(batch.act.row(i).as_slice().expect("standard layout"));
        obs.row_mut(n + i).assign(&ndarray::ArrayView1::from(&o));
        act.row_mut(n + i).assign(&ndarray::ArrayView1::from(&a));
    }
    let mean = policy.mean(obs.slice(ndarray::s![n.., ..]));
    let mut logp_old = batch.logp_old.clone();
    for i in 0..n {
        logp_old.push(log_prob(
            mean.row(i).as_slice().expect("standard layout"),
            &policy.log_std,
            act.row(n + i).as_slice().expect("standard layout"),
        ));
    }
    let dup = |v: &[f64]| v.iter().chain(v).copied().collect::<Vec<_>>();
    Batch {
        obs,
        act,
        logp_old,
        adv: dup(&batch.adv),
        ret: dup(&batch.ret),
    }
}
