//! Exploration by seeking poorly modeled trajectories.
//!
//! An exploration policy is trained with clipped policy gradients to
//! maximize the model's loss on the trajectories it produces, i.e. the
//! negated regularized ELBO. [`overall_loop`] alternates MPC episodes,
//! exploration from states the MPC episode visited, replay-buffer updates,
//! a policy update and model training.

mod ppo;

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use ppo::{advantages, ppo_update, surrogate_loss, Baseline, PpoConfig, PpoSample, PpoStats};

use crate::diffcore::{AdamState, Graph};
use crate::envs::{Dataset, EnvSnapshot, Environment};
use crate::error::{Error, Result};
use crate::objective::{total_loss, ObjectiveConfig, Trainer};
use crate::pipeline::baseline::{RecurrentConfig, RecurrentNet};
use crate::pipeline::Actor;
use crate::planner::{mpc_episode, PlanConfig, RewardFn};
use crate::seqmodel::{DecodeMode, SeqModel, LOG_STD_MIN};
use crate::trajectory::Trajectory;

/// Recurrent policy over observation histories, with its optimizer state.
#[derive(Clone, Debug)]
pub struct ExplorationPolicy {
    pub net: RecurrentNet,
    pub adam: AdamState,
}

impl ExplorationPolicy {
    pub fn new<R: Rng>(env: &dyn Environment, hidden_dim: usize, learning_rate: f64, rng: &mut R) -> Result<Self> {
        let config = RecurrentConfig {
            obs_dim: env.obs_dim(),
            action_dim: env.action_dim(),
            action_kind: env.action_kind(),
            hidden_dim,
            decoder_hidden_dims: vec![hidden_dim],
            predict_obs: false,
            obs_log_std_min: LOG_STD_MIN,
        };
        Ok(Self {
            net: RecurrentNet::new(config, rng)?,
            adam: AdamState::new(learning_rate),
        })
    }

    /// Zeroes the action head: uniform categorical actions, or standard
    /// normal continuous ones.
    pub fn make_uniform(&mut self) {
        for (name, p) in self.net.params.iter_mut() {
            if name.starts_with("dec_act.out.") {
                p.value.data_mut().fill(0.0);
            }
        }
    }

    /// `log pi(a_t | o_{0..t})` for every action of `traj`.
    pub fn log_probs(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let mut g = Graph::inference();
        let net = self.net.bind(&mut g)?;
        let mut state = net.zero_state(&mut g);
        let mut out = Vec::with_capacity(traj.len());
        for t in 0..traj.len() {
            let o = g.constant_vec(&traj.observations[t]);
            state = net.step(&mut g, o, &state)?;
            let dist = net.decode_action(&mut g, &state)?;
            let lp = dist.log_likelihood(&mut g, &traj.actions[t])?;
            out.push(g.scalar(lp));
        }
        Ok(out)
    }

    /// Samples actions from the current environment state until the episode
    /// ends or `max_len` steps were taken.
    pub fn rollout<R: Rng + ?Sized>(&self, env: &mut dyn Environment, max_len: usize, rng: &mut R) -> Result<Trajectory> {
        let mut actor = Actor::recurrent(&self.net)?;
        let o0 = env.observe();
        actor.begin(&o0)?;
        let mut traj = Trajectory::new(o0);
        while traj.len() < max_len && !env.is_done() {
            let a = actor.act(DecodeMode::Sample, rng)?;
            let out = env.step(&a)?;
            actor.observe(&out.observation)?;
            traj.push(a, out.reward, out.observation);
        }
        Ok(traj)
    }
}

/// Bounded FIFO of trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Trajectory>,
    inserted: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Trajectories inserted over the buffer's lifetime.
    pub fn total_inserted(&self) -> usize {
        self.inserted
    }

    /// Appends, evicting the oldest trajectory when full.
    pub fn push(&mut self, traj: Trajectory) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(traj);
        self.inserted += 1;
    }

    pub fn extend(&mut self, trajs: impl IntoIterator<Item = Trajectory>) {
        for t in trajs {
            self.push(t);
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.items.iter()
    }

    /// `n` trajectories drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Trajectory> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| self.items[rng.gen_range(0..self.items.len())].clone())
            .collect()
    }

    /// Contents as a dataset, oldest first.
    pub fn to_dataset(&self, env: &dyn Environment) -> Dataset {
        let mut d = Dataset::for_env(env);
        d.episodes = self.items.iter().cloned().collect();
        d
    }
}

/// The model's loss on `traj`: high for trajectories the model explains
/// poorly. Posterior noise comes from `seed`; nothing is differentiated.
pub fn exploration_reward(
    traj: &Trajectory,
    model: &SeqModel,
    config: &ObjectiveConfig,
    iteration: u64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(total_loss(model, traj, config, iteration, &mut rng)?.total)
}

/// An exploration trajectory and where it started.
#[derive(Clone, Debug, PartialEq)]
pub struct Explored {
    pub trajectory: Trajectory,
    /// Index of the recorded state it started from.
    pub start: Option<usize>,
    /// Restoring failed and the episode start was used instead.
    pub fell_back: bool,
}

/// `n` policy rollouts, each from a uniformly drawn recorded state. States
/// that cannot be restored fall back to a fresh episode.
pub fn collect_exploration<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    policy: &ExplorationPolicy,
    starts: &[EnvSnapshot],
    n: usize,
    max_len: usize,
    rng: &mut R,
) -> Result<Vec<Explored>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (start, fell_back) = if starts.is_empty() {
            env.reset(rng.gen());
            (None, true)
        } else {
            let i = rng.gen_range(0..starts.len());
            match env.restore(&starts[i]) {
                Ok(()) => (Some(i), false),
                Err(_) => {
                    env.reset(rng.gen());
                    (None, true)
                }
            }
        };
        if env.is_done() {
            env.reset(rng.gen());
        }
        let trajectory = policy.rollout(env, max_len, rng)?;
        out.push(Explored {
            trajectory,
            start,
            fell_back,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExploreConfig {
    pub iterations: usize,
    pub warmup_trajectories: usize,
    /// Optimizer steps on the warm-up data.
    pub warmup_steps: usize,
    pub trajectories_per_iteration: usize,
    pub max_exploration_len: usize,
    pub buffer_capacity: usize,
    /// Model optimizer steps per iteration.
    pub model_steps: usize,
    pub batch_size: usize,
    /// Fraction of each model batch taken from the fresh exploration data.
    pub fresh_fraction: f64,
    pub policy_hidden_dim: usize,
    pub policy_learning_rate: f64,
    pub mpc_episode_len: usize,
    pub plan: PlanConfig,
    pub ppo: PpoConfig,
    pub objective: ObjectiveConfig,
    pub seed: u64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            warmup_trajectories: 50,
            warmup_steps: 50,
            trajectories_per_iteration: 8,
            max_exploration_len: 64,
            buffer_capacity: 1000,
            model_steps: 10,
            batch_size: 8,
            fresh_fraction: 0.5,
            policy_hidden_dim: 32,
            policy_learning_rate: 3e-4,
            mpc_episode_len: 200,
            plan: PlanConfig::with_k(256, 5),
            ppo: PpoConfig::default(),
            objective: ObjectiveConfig::default(),
            seed: 0,
        }
    }
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.ppo.validate()?;
        self.objective.validate()?;
        if self.iterations == 0 || self.trajectories_per_iteration == 0 || self.batch_size == 0 {
            return Err(Error::Config("iterations, trajectories and batch size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fresh_fraction) || self.max_exploration_len == 0 {
            return Err(Error::Config("fresh_fraction must lie in [0, 1] and max length be >= 1".into()));
        }
        Ok(())
    }
}

/// How often each step of the loop ran.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub mpc_episodes: usize,
    pub exploration_batches: usize,
    pub buffer_updates: usize,
    pub ppo_updates: usize,
    pub model_phases: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub mpc_return: f64,
    pub mean_exploration_reward: f64,
    pub model_loss: f64,
}

pub struct LoopOutcome {
    pub model: SeqModel,
    pub policy: ExplorationPolicy,
    pub buffer: ReplayBuffer,
    pub metrics: Vec<IterationMetrics>,
    pub counts: StepCounts,
    /// Step names in execution order.
    pub log: Vec<&'static str>,
}

impl LoopOutcome {
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("iteration,mpc_return,mean_exploration_reward,model_loss\n");
        for m in &self.metrics {
            s.push_str(&format!(
                "{},{},{},{}\n",
                m.iteration, m.mpc_return, m.mean_exploration_reward, m.model_loss
            ));
        }
        s
    }
}

fn train_model<R: Rng + ?Sized>(trainer: &mut Trainer, batches: &[Vec<Trajectory>], rng: &mut R) -> Result<f64> {
    let mut last = f64::NAN;
    for b in batches {
        let b: Vec<Trajectory> = b.iter().filter(|t| !t.is_empty()).cloned().collect();
        if !b.is_empty() {
            last = trainer.step(&b, rng)?.total;
        }
    }
    Ok(last)
}

/// Warm-up, then `config.iterations` rounds of MPC, exploration, buffer
/// update, policy update and model training.
pub fn overall_loop(
    env: &mut dyn Environment,
    model: SeqModel,
    reward: &dyn RewardFn,
    config: &ExploreConfig,
) -> Result<LoopOutcome> {
    overall_loop_with(env, model, reward, config, &mut |_, _| Ok(()))
}

/// [`overall_loop`], calling `after_iteration` with the iteration index and
/// the updated model at the end of every iteration.
pub fn overall_loop_with(
    env: &mut dyn Environment,
    model: SeqModel,
    reward: &dyn RewardFn,
    config: &ExploreConfig,
    after_iteration: &mut dyn FnMut(usize, &SeqModel) -> Result<()>,
) -> Result<LoopOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = ExplorationPolicy::new(&*env, config.policy_hidden_dim, config.policy_learning_rate, &mut rng)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut trainer = Trainer::new(model, config.objective.clone())?;
    let mut counts = StepCounts::default();
    let mut log = Vec::new();

    for _ in 0..config.warmup_trajectories {
        env.reset(rng.gen());
        let len = env.max_steps();
        buffer.push(policy.rollout(env, len, &mut rng)?);
    }
    if !buffer.is_empty() {
        let batches: Vec<Vec<Trajectory>> = (0..config.warmup_steps)
            .map(|_| buffer.sample(config.batch_size, &mut rng))
            .collect();
        train_model(&mut trainer, &batches, &mut rng)?;
    }

    let mut metrics = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let episode = mpc_episode(
            env,
            &trainer.model,
            reward,
            &config.plan,
            config.mpc_episode_len,
            rng.gen(),
            &mut rng,
        )?;
        counts.mpc_episodes += 1;
        log.push("mpc");

        let explored = collect_exploration(
            env,
            &policy,
            &episode.snapshots,
            config.trajectories_per_iteration,
            config.max_exploration_len,
            &mut rng,
        )?;
        let fresh: Vec<Trajectory> = explored.into_iter().map(|e| e.trajectory).collect();
        counts.exploration_batches += 1;
        log.push("explore");

        buffer.extend(fresh.iter().cloned());
        counts.buffer_updates += 1;
        log.push("buffer");

        let reward_seed: u64 = rng.gen();
        let rewards: Vec<f64> = fresh
            .iter()
            .map(|t| {
                if t.is_empty() {
                    Ok(0.0)
                } else {
                    exploration_reward(t, &trainer.model, &config.objective, trainer.iteration, reward_seed)
                }
            })
            .collect::<Result<_>>()?;
        ppo_update(&mut policy, &fresh, &rewards, &config.ppo, &mut rng)?;
        counts.ppo_updates += 1;
        log.push("ppo");

        let n_fresh = ((config.batch_size as f64) * config.fresh_fraction).round() as usize;
        let batches: Vec<Vec<Trajectory>> = (0..config.model_steps)
            .map(|_| {
                let mut b: Vec<Trajectory> = fresh.choose_multiple(&mut rng, n_fresh.min(fresh.len())).cloned().collect();
                b.extend(buffer.sample(config.batch_size - b.len(), &mut rng));
                b
            })
            .collect();
        let model_loss = train_model(&mut trainer, &batches, &mut rng)?;
        counts.model_phases += 1;
        log.push("model");

        metrics.push(IterationMetrics {
            iteration,
            mpc_return: episode.total_reward(),
            mean_exploration_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            model_loss,
        });
        after_iteration(iteration, &trainer.model)?;
    }
    Ok(LoopOutcome {
        model: trainer.model,
        policy,
        buffer,
        metrics,
        counts,
        log,
    })
}
