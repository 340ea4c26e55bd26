use rand::Rng;

use crate::diffcore::Graph;
use crate::error::{Error, Result};
use crate::seqmodel::{LatentMode, SeqModel};
use crate::trajectory::Trajectory;

/// Importance-weighted negative log-likelihood bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NllEstimate {
    /// Observations and actions.
    pub combined: f64,
    /// Observations only.
    pub observation: f64,
}

fn neg_log_mean_exp(log_w: &[f64]) -> f64 {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = log_w.iter().map(|w| (w - max).exp()).sum();
    -(max + (s / log_w.len() as f64).ln())
}

/// `-log (1/K) sum_k exp(log w_k)` with `log w_k` the single-sample
/// log-weight `sum_t [log p(o_t|.) + log p(a_{t-1}|.) + log p(z_t|h) - log q(z_t|h,b)]`
/// of posterior sample `k`.
pub fn sequence_nll<R: Rng + ?Sized>(
    model: &SeqModel,
    traj: &Trajectory,
    num_importance_samples: usize,
    rng: &mut R,
) -> Result<NllEstimate> {
    if num_importance_samples < 1 {
        return Err(Error::Contract("sequence_nll needs at least one sample".into()));
    }
    let mut g = Graph::inference();
    let bound = model.bind(&mut g)?;
    let mark = g.len();
    let mut log_w = Vec::with_capacity(num_importance_samples);
    let mut log_w_obs = Vec::with_capacity(num_importance_samples);
    for _ in 0..num_importance_samples {
        let tf = bound.teacher_forced_pass(&mut g, traj, None, LatentMode::Posterior, rng)?;
        let (mut obs, mut act, mut latent) = (0.0, 0.0, 0.0);
        for s in &tf.steps {
            let z = g.data(s.z).to_vec();
            obs += g.scalar(s.obs_ll);
            act += g.scalar(s.act_ll);
            latent += s.prior.read(&g).log_prob(&z) - s.posterior.read(&g).log_prob(&z);
        }
        log_w.push(obs + act + latent);
        log_w_obs.push(obs + latent);
        g.truncate(mark);
    }
    Ok(NllEstimate {
        combined: neg_log_mean_exp(&log_w),
        observation: neg_log_mean_exp(&log_w_obs),
    })
}
