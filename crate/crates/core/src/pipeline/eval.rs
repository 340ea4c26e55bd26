use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::TrainedModel;
use super::BaselineKind;
use crate::diffcore::Graph;
use crate::envs::{rollout, EnvEvent, Environment};
use crate::error::{Error, Result};
use crate::objective::{aux_costs_per_step, sequence_nll};
use crate::seqmodel::{DecodeMode, LatentMode, SeqModel};
use crate::trajectory::{Action, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    /// Episode `i` uses layout seed `seed + i`.
    pub seed: u64,
    pub mode: DecodeMode,
    /// Importance samples for the full model's held-out NLL.
    pub nll_samples: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            episodes: 50,
            seed: 10_000,
            mode: DecodeMode::Mode,
            nll_samples: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub kind: BaselineKind,
    pub mean_reward: f64,
    /// Standard error over episodes; absent with fewer than two.
    pub reward_stderr: Option<f64>,
    pub success_rate: f64,
    /// Mean held-out observation NLL per trajectory.
    pub obs_nll: Option<f64>,
    /// Mean held-out NLL of observations and actions per trajectory.
    pub combined_nll: Option<f64>,
    /// Per-step auxiliary cost on the first evaluation episode.
    pub aux_trace: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
}

/// Mean and standard error; the error is absent for fewer than two values.
pub fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, None);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// One episode of `model` acting in `env`.
pub fn run_episode(
    model: &TrainedModel,
    env: &mut dyn Environment,
    seed: u64,
    mode: DecodeMode,
    rng: &mut ChaCha8Rng,
) -> Result<(Trajectory, Vec<(usize, EnvEvent)>)> {
    let mut actor = model.actor()?;
    let o0 = env.reset(seed);
    actor.begin(&o0)?;
    let mut traj = Trajectory::new(o0);
    let mut events = Vec::new();
    while !env.is_done() {
        let a = actor.act(mode, rng)?;
        let out = env.step(&a)?;
        events.extend(out.events.iter().map(|e| (traj.len(), *e)));
        actor.observe(&out.observation)?;
        traj.push(a, out.reward, out.observation);
    }
    Ok((traj, events))
}

/// Per-step `-log p(b_t | z_t)` along a real trajectory, with `b_t` computed
/// from the realized suffix and `z_t` a posterior draw.
pub fn aux_trace(model: &SeqModel, traj: &Trajectory, seed: u64) -> Result<Vec<f64>> {
    let mut g = Graph::inference();
    let b = model.bind(&mut g)?;
    let tf = b.teacher_forced_pass(
        &mut g,
        traj,
        None,
        LatentMode::Posterior,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )?;
    aux_costs_per_step(&mut g, &b, &tf.steps)
}

/// Reward and success of a policy over consecutive layout seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutStats {
    pub mean_reward: f64,
    pub reward_stderr: Option<f64>,
    pub success_rate: f64,
    pub seeds: Vec<u64>,
    pub episodes: Vec<Trajectory>,
}

/// Runs `policy` for `opts.episodes` episodes. The policy also gets an RNG
/// seeded from `opts.seed`, shared across episodes.
pub fn evaluate_policy<F>(env: &mut dyn Environment, opts: &EvalOptions, mut policy: F) -> Result<RolloutStats>
where
    F: FnMut(&dyn Environment, &Trajectory, &mut ChaCha8Rng) -> Result<Action>,
{
    if opts.episodes == 0 {
        return Err(Error::Contract("evaluate needs at least one episode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rewards = Vec::with_capacity(opts.episodes);
    let mut successes = 0usize;
    let mut seeds = Vec::with_capacity(opts.episodes);
    let mut episodes = Vec::with_capacity(opts.episodes);
    for i in 0..opts.episodes {
        let seed = opts.seed + i as u64;
        let traj = rollout(env, seed, |e, t| policy(e, t, &mut rng))?;
        rewards.push(traj.total_reward());
        successes += env.succeeded() as usize;
        seeds.push(seed);
        episodes.push(traj);
    }
    let (mean_reward, reward_stderr) = mean_stderr(&rewards);
    Ok(RolloutStats {
        mean_reward,
        reward_stderr,
        success_rate: successes as f64 / opts.episodes as f64,
        seeds,
        episodes,
    })
}

/// Rolls the model out in `env` and scores it on held-out trajectories.
pub fn evaluate(
    model: &TrainedModel,
    env: &mut dyn Environment,
    opts: &EvalOptions,
    heldout: &[Trajectory],
) -> Result<EvalReport> {
    let mut actor = model.actor()?;
    let stats = evaluate_policy(env, opts, |_, traj, rng| {
        match traj.observations.last() {
            Some(o) if !traj.is_empty() => actor.observe(o)?,
            _ => actor.begin(&traj.observations[0])?,
        }
        actor.act(opts.mode, rng)
    })?;
    let mut nll_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let (obs_nll, combined_nll) = match model {
        _ if heldout.is_empty() => (None, None),
        TrainedModel::Full(m) => {
            let (mut obs, mut comb) = (0.0, 0.0);
            for t in heldout {
                let est = sequence_nll(m, t, opts.nll_samples, &mut nll_rng)?;
                obs += est.observation;
                comb += est.combined;
            }
            let n = heldout.len() as f64;
            (Some(obs / n), Some(comb / n))
        }
        TrainedModel::Recurrent(r) => {
            let (mut obs, mut comb) = (0.0, 0.0);
            for t in heldout {
                let lb = r.loss(t)?;
                obs -= lb.obs_recon;
                comb += lb.total;
            }
            let n = heldout.len() as f64;
            let obs = r.config.predict_obs.then_some(obs / n);
            (obs, Some(comb / n))
        }
    };
    let aux = match model {
        TrainedModel::Full(m) => Some(aux_trace(m, &stats.episodes[0], opts.seed)?),
        TrainedModel::Recurrent(_) => None,
    };
    Ok(EvalReport {
        kind: model.kind(),
        mean_reward: stats.mean_reward,
        reward_stderr: stats.reward_stderr,
        success_rate: stats.success_rate,
        obs_nll,
        combined_nll,
        aux_trace: aux,
        seeds: stats.seeds,
    })
}

/// Auxiliary cost along one episode with the steps at which subgoal events
/// happened. Event step `k` is the index into `aux_costs` of the step whose
/// observation first shows the event.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgoalTrace {
    pub aux_costs: Vec<f64>,
    pub events: Vec<(usize, EnvEvent)>,
    pub trajectory: Trajectory,
}

impl SubgoalTrace {
    pub fn event_step(&self, event: EnvEvent) -> Option<usize> {
        self.events.iter().find(|(_, e)| *e == event).map(|(k, _)| *k)
    }

    /// Mean cost up to and including `step`, and after it.
    pub fn split_means(&self, step: usize) -> Option<(f64, f64)> {
        if step + 1 >= self.aux_costs.len() {
            return None;
        }
        let (before, after) = self.aux_costs.split_at(step + 1);
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        Some((mean(before), mean(after)))
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("step,aux_cost,event\n");
        for (k, c) in self.aux_costs.iter().enumerate() {
            let ev: Vec<String> = self
                .events
                .iter()
                .filter(|(i, _)| *i == k)
                .map(|(_, e)| format!("{e:?}"))
                .collect();
            s.push_str(&format!("{},{c},{}\n", k + 1, ev.join("|")));
        }
        s
    }
}

pub fn subgoal_trace(
    model: &TrainedModel,
    env: &mut dyn Environment,
    episode_seed: u64,
    mode: DecodeMode,
) -> Result<SubgoalTrace> {
    let full = model.as_full()?;
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    let (trajectory, events) = run_episode(model, env, episode_seed, mode, &mut rng)?;
    let aux_costs = aux_trace(full, &trajectory, episode_seed)?;
    Ok(SubgoalTrace {
        aux_costs,
        events,
        trajectory,
    })
}
