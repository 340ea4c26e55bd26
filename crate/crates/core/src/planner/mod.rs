//! Model-predictive control in latent space.
//!
//! Each planning round draws `m` imagined futures from the model's
//! sequential prior, scores them with a [`RewardFn`], and executes the best
//! one's first `k` latents in the real environment. During execution the
//! actions are re-decoded from the real forward state and the saved latents,
//! and the forward state is advanced with real observations only.

use rand::Rng;

use crate::diffcore::Graph;
use crate::envs::{EnvKind, EnvSnapshot, Environment, PointsConfig};
use crate::error::{Error, Result};
use crate::seqmodel::{DecodeMode, ForwardState, GenerateOptions, SeqModel};
use crate::trajectory::{Action, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct PlanConfig {
    /// Candidates per planning round.
    pub m: usize,
    /// Imagined steps per candidate.
    pub horizon: usize,
    /// Real steps executed between replans.
    pub k: usize,
    pub action_mode: DecodeMode,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            m: 2048,
            horizon: 38,
            k: 19,
            action_mode: DecodeMode::Mode,
        }
    }
}

impl PlanConfig {
    /// `horizon = 2k`.
    pub fn with_k(m: usize, k: usize) -> Self {
        Self {
            m,
            horizon: 2 * k,
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.k > self.horizon {
            return Err(Error::Config(format!(
                "need m >= 1 and 1 <= k <= horizon, got m={} k={} horizon={}",
                self.m, self.k, self.horizon
            )));
        }
        Ok(())
    }
}

/// Reward of an imagined step: the predicted observation after `action`,
/// and the step's index within the imagined rollout.
pub trait RewardFn {
    fn reward(&self, obs: &[f64], action: &Action, step: usize) -> f64;
}

impl<F> RewardFn for F
where
    F: Fn(&[f64], &Action, usize) -> f64,
{
    fn reward(&self, obs: &[f64], action: &Action, step: usize) -> f64 {
        self(obs, action, step)
    }
}

/// Planning reward for a bundled environment. Points: goals reached minus
/// distance to the current goal. Grid: carrying the key, plus the goal being
/// in view.
pub fn default_reward(env: EnvKind) -> Box<dyn RewardFn> {
    match env {
        EnvKind::Points => {
            let cfg = PointsConfig::default();
            Box::new(move |obs: &[f64], _: &Action, _: usize| {
                let dist = (obs[4] * obs[4] + obs[5] * obs[5]).sqrt() * cfg.arena;
                3.0 * obs[6] * cfg.n_goals as f64 - dist
            })
        }
        EnvKind::Grid => Box::new(|obs: &[f64], _: &Action, _: usize| {
            let carried = obs[obs.len() - 1];
            let goal_seen = obs[..obs.len() - 1].chunks(6).map(|c| c[4]).fold(0.0, f64::max);
            carried + 2.0 * goal_seen
        }),
    }
}

/// One imagined future.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub latents: Vec<Vec<f64>>,
    /// Predicted observation means, one per step.
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub cumulative_reward: f64,
}

/// `m` independent imagined rollouts from `(o_start, h_start)`.
pub fn sample_candidates<R: Rng + ?Sized>(
    model: &SeqModel,
    o_start: &[f64],
    h_start: &ForwardState,
    config: &PlanConfig,
    reward: &dyn RewardFn,
    rng: &mut R,
) -> Result<Vec<Candidate>> {
    config.validate()?;
    let mut g = Graph::inference();
    let bound = model.bind(&mut g)?;
    let mark = g.len();
    let mut out = Vec::with_capacity(config.m);
    for _ in 0..config.m {
        g.truncate(mark);
        let gen = bound.generate(&mut g, o_start, h_start, config.horizon, rng, GenerateOptions::default())?;
        let actions = gen.trajectory.actions;
        let cumulative_reward = gen
            .obs_means
            .iter()
            .zip(&actions)
            .enumerate()
            .map(|(t, (o, a))| reward.reward(o, a, t))
            .sum();
        out.push(Candidate {
            latents: gen.latents.into_iter().map(|l| l.z).collect(),
            observations: gen.obs_means,
            actions,
            cumulative_reward,
        });
    }
    Ok(out)
}

/// Index of the highest-reward candidate; the first one wins ties.
pub fn select_best(candidates: &[Candidate]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        match best {
            Some(b) if candidates[b].cumulative_reward >= c.cumulative_reward => {}
            _ => best = Some(i),
        }
    }
    best.ok_or_else(|| Error::Contract("select_best of no candidates".into()))
}

/// Real transitions driven by a plan's latents.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Starts at `o_start`.
    pub transitions: Trajectory,
    pub final_state: ForwardState,
    /// Indices into the plan's latents, in the order they were used.
    pub latents_used: Vec<usize>,
    /// Environment state before each executed step.
    pub snapshots: Vec<EnvSnapshot>,
    pub done: bool,
}

impl Segment {
    pub fn final_observation(&self) -> &[f64] {
        self.transitions.observations.last().expect("trajectory has o_0")
    }
}

/// Executes up to `k` of `best`'s latents in `env`, stopping early when the
/// episode ends.
#[allow(clippy::too_many_arguments)]
pub fn execute_segment<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    model: &SeqModel,
    best: &Candidate,
    k: usize,
    h_start: &ForwardState,
    o_start: &[f64],
    action_mode: DecodeMode,
    rng: &mut R,
) -> Result<Segment> {
    if k > best.latents.len() {
        return Err(Error::Contract(format!(
            "cannot execute {k} steps of a {}-step plan",
            best.latents.len()
        )));
    }
    let mut g = Graph::inference();
    let bound = model.bind(&mut g)?;
    let mark = g.len();
    let mut state = h_start.clone();
    let mut transitions = Trajectory::new(o_start.to_vec());
    let mut latents_used = Vec::with_capacity(k);
    let mut snapshots = Vec::with_capacity(k);
    for (i, z) in best.latents.iter().take(k).enumerate() {
        if env.is_done() {
            break;
        }
        g.truncate(mark);
        let h = state.bind(&mut g);
        let zv = g.constant_vec(z);
        let dist = bound.decode_action(&mut g, &h, zv)?;
        let action = match action_mode {
            DecodeMode::Mode => dist.mode(&g),
            DecodeMode::Sample => dist.sample(&g, rng),
        };
        let action = match action {
            Action::Continuous(v) => Action::Continuous(v.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect()),
            a => a,
        };
        snapshots.push(env.snapshot());
        let out = env.step(&action)?;
        let o = g.constant_vec(&out.observation);
        let next = bound.forward_transition(&mut g, o, &h, zv)?;
        state = ForwardState::read(&g, &next);
        latents_used.push(i);
        transitions.push(action, out.reward, out.observation);
    }
    Ok(Segment {
        transitions,
        final_state: state,
        latents_used,
        snapshots,
        done: env.is_done(),
    })
}

/// A whole planning episode.
#[derive(Clone, Debug, PartialEq)]
pub struct MpcEpisode {
    pub trajectory: Trajectory,
    pub replans: usize,
    /// Imagined reward of each executed plan.
    pub plan_rewards: Vec<f64>,
    /// Environment state before each real step, for restarts.
    pub snapshots: Vec<EnvSnapshot>,
}

impl MpcEpisode {
    pub fn total_reward(&self) -> f64 {
        self.trajectory.total_reward()
    }
}

/// Runs MPC for up to `episode_len` real steps on the layout from `seed`.
pub fn mpc_episode<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    model: &SeqModel,
    reward: &dyn RewardFn,
    config: &PlanConfig,
    episode_len: usize,
    seed: u64,
    rng: &mut R,
) -> Result<MpcEpisode> {
    config.validate()?;
    if episode_len == 0 {
        return Err(Error::Contract("episode length must be >= 1".into()));
    }
    let o0 = env.reset(seed);
    let mut state = {
        let mut g = Graph::inference();
        let b = model.bind(&mut g)?;
        let s = b.initial_state(&mut g, &o0)?;
        ForwardState::read(&g, &s)
    };
    let mut trajectory = Trajectory::new(o0);
    let mut replans = 0;
    let mut plan_rewards = Vec::new();
    let mut snapshots = Vec::new();
    while trajectory.len() < episode_len && !env.is_done() {
        let o = trajectory.observations.last().expect("trajectory has o_0").clone();
        let candidates = sample_candidates(model, &o, &state, config, reward, rng)?;
        let best = &candidates[select_best(&candidates)?];
        debug_assert!(candidates.iter().all(|c| c.cumulative_reward <= best.cumulative_reward));
        let k = config.k.min(episode_len - trajectory.len());
        let seg = execute_segment(env, model, best, k, &state, &o, config.action_mode, rng)?;
        replans += 1;
        plan_rewards.push(best.cumulative_reward);
        for t in 0..seg.transitions.len() {
            trajectory.push(
                seg.transitions.actions[t].clone(),
                seg.transitions.rewards[t],
                seg.transitions.observations[t + 1].clone(),
            );
        }
        snapshots.extend(seg.snapshots);
        state = seg.final_state;
    }
    Ok(MpcEpisode {
        trajectory,
        replans,
        plan_rewards,
        snapshots,
    })
}
