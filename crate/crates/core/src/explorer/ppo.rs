use rand::seq::SliceRandom;
use rand::Rng;

use super::ExplorationPolicy;
use crate::diffcore::{adam_step, Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::pipeline::baseline::{bind_recurrent, RecurrentConfig};
use crate::seqmodel::ActionDist;
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    /// Subtract the batch-mean reward.
    MeanReward,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub clip_ratio: f64,
    pub epochs: usize,
    /// Trajectories per minibatch.
    pub minibatch_size: usize,
    pub entropy_weight: f64,
    pub baseline: Baseline,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_ratio: 0.2,
            epochs: 4,
            minibatch_size: 4,
            entropy_weight: 0.01,
            baseline: Baseline::MeanReward,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_ratio > 0.0) || self.epochs == 0 || self.minibatch_size == 0 || self.entropy_weight < 0.0 {
            return Err(Error::Config(format!("invalid PPO config {self:?}")));
        }
        Ok(())
    }
}

/// Per-trajectory advantages.
pub fn advantages(rewards: &[f64], baseline: Baseline) -> Vec<f64> {
    match baseline {
        Baseline::None => rewards.to_vec(),
        Baseline::MeanReward => {
            let mean = rewards.iter().sum::<f64>() / rewards.len().max(1) as f64;
            rewards.iter().map(|r| r - mean).collect()
        }
    }
}

/// One trajectory's contribution to the surrogate: every action shares the
/// trajectory's advantage.
#[derive(Clone, Debug)]
pub struct PpoSample<'a> {
    pub trajectory: &'a Trajectory,
    pub advantage: f64,
    pub old_log_probs: Vec<f64>,
}

fn entropy(g: &mut Graph, dist: &ActionDist) -> Result<Var> {
    match dist {
        ActionDist::Categorical { log_probs } => {
            let p = g.exp(*log_probs);
            let plp = g.mul(p, *log_probs)?;
            let s = g.sum(plp);
            Ok(g.neg(s))
        }
        ActionDist::Gaussian(d) => {
            let n = g.value(d.log_std).len() as f64;
            let s = g.sum(d.log_std);
            Ok(g.shift(s, 0.5 * n * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()))
        }
    }
}

/// Negated clipped surrogate plus entropy bonus, averaged over all actions in
/// `batch`, for the policy with parameters `params`.
pub fn surrogate_loss(
    g: &mut Graph,
    params: &ParamStore,
    net_config: &RecurrentConfig,
    batch: &[PpoSample<'_>],
    config: &PpoConfig,
) -> Result<Var> {
    let net = bind_recurrent(net_config, params, g)?;
    let mut terms = Vec::new();
    let mut entropies = Vec::new();
    for s in batch {
        let traj = s.trajectory;
        if s.old_log_probs.len() != traj.len() {
            return Err(Error::dim("ppo old log-probs", &[traj.len()], &[s.old_log_probs.len()]));
        }
        let mut state = net.zero_state(g);
        for t in 0..traj.len() {
            let o = g.constant_vec(&traj.observations[t]);
            state = net.step(g, o, &state)?;
            let dist = net.decode_action(g, &state)?;
            let lp = dist.log_likelihood(g, &traj.actions[t])?;
            let diff = g.shift(lp, -s.old_log_probs[t]);
            let ratio = g.exp(diff);
            let clipped = g.clamp(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio);
            let a = g.scale(ratio, s.advantage);
            let b = g.scale(clipped, s.advantage);
            terms.push(g.min(a, b)?);
            if config.entropy_weight > 0.0 {
                entropies.push(entropy(g, &dist)?);
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::Contract("surrogate of an empty batch".into()));
    }
    let n = terms.len() as f64;
    let mut objective = g.add_all(&terms)?;
    if !entropies.is_empty() {
        let h = g.add_all(&entropies)?;
        let h = g.scale(h, config.entropy_weight);
        objective = g.add(objective, h)?;
    }
    let mean = g.scale(objective, 1.0 / n);
    Ok(g.neg(mean))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub optimizer_steps: usize,
    pub mean_advantage: f64,
    /// Surrogate loss of the first and last minibatch.
    pub first_loss: f64,
    pub last_loss: f64,
}

/// Clipped policy-gradient update with one scalar reward per trajectory.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut ExplorationPolicy,
    trajectories: &[Trajectory],
    rewards: &[f64],
    config: &PpoConfig,
    rng: &mut R,
) -> Result<PpoStats> {
    config.validate()?;
    if trajectories.is_empty() {
        return Err(Error::Contract("PPO update on an empty batch".into()));
    }
    if rewards.len() != trajectories.len() {
        return Err(Error::dim("ppo rewards", &[trajectories.len()], &[rewards.len()]));
    }
    let adv = advantages(rewards, config.baseline);
    let old: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| policy.log_probs(t))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    let mut stats = PpoStats {
        mean_advantage: adv.iter().sum::<f64>() / adv.len() as f64,
        ..PpoStats::default()
    };
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for idx in order.chunks(config.minibatch_size) {
            let batch: Vec<PpoSample> = idx
                .iter()
                .map(|i| PpoSample {
                    trajectory: &trajectories[*i],
                    advantage: adv[*i],
                    old_log_probs: old[*i].clone(),
                })
                .filter(|s| !s.trajectory.is_empty())
                .collect();
            if batch.is_empty() {
                continue;
            }
            let mut g = Graph::new();
            let loss = surrogate_loss(&mut g, &policy.net.params, &policy.net.config, &batch, config)?;
            g.backward(loss)?;
            g.accumulate_param_grads(&mut policy.net.params);
            adam_step(&mut policy.net.params, &mut policy.adam);
            let value = g.scalar(loss);
            if stats.optimizer_steps == 0 {
                stats.first_loss = value;
            }
            stats.last_loss = value;
            stats.optimizer_steps += 1;
        }
    }
    Ok(stats)
}
