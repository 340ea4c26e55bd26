//! Small test domains with scripted experts.
//!
//! [`KeyDoorGrid`] is a partially observable two-room gridworld where the
//! agent must pick up a key, unlock the door in the dividing wall and walk to
//! the goal. [`PointGoals`] is a point mass that has to visit a sequence of
//! goals and is rewarded for every third one.
//!
//! Both implement [`Environment`], can be snapshotted and restored exactly,
//! and provide an expert used to generate imitation datasets (see
//! [`generate_dataset`]).

mod dataset;
mod grid;
mod points;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{generate_dataset, load_dataset, read_dataset, rollout_expert, write_dataset, Dataset};
pub use grid::{Cell, GridConfig, GridState, KeyDoorGrid, GRID_ACTIONS};
pub use points::{PointGoals, PointsConfig, PointsState};

use crate::error::{Error, Result};
use crate::seqmodel::ActionKind;
use crate::trajectory::{Action, Trajectory};

/// Something that happened during a step, reported for instrumentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvEvent {
    KeyPickedUp,
    DoorUnlocked,
    GoalReached,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub events: Vec<EnvEvent>,
}

/// Opaque, self-contained copy of an environment's full state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvSnapshot {
    pub(crate) env: &'static str,
    pub(crate) bytes: Vec<u8>,
}

impl EnvSnapshot {
    pub fn env_name(&self) -> &str {
        self.env
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Rebuilds a snapshot from raw bytes, e.g. ones read back from disk.
    pub fn from_bytes(env: &str, bytes: Vec<u8>) -> Result<Self> {
        let env = match env {
            grid::NAME => grid::NAME,
            points::NAME => points::NAME,
            other => return Err(Error::Env(format!("unknown environment `{other}`"))),
        };
        Ok(Self { env, bytes })
    }

    pub(crate) fn encode<T: Serialize>(env: &'static str, state: &T) -> Self {
        Self {
            env,
            bytes: serde_json::to_vec(state).expect("environment state serializes"),
        }
    }

    pub(crate) fn decode<T: for<'de> Deserialize<'de>>(&self, env: &'static str) -> Result<T> {
        if self.env != env {
            return Err(Error::Env(format!(
                "snapshot of `{}` restored into `{env}`",
                self.env
            )));
        }
        serde_json::from_slice(&self.bytes).map_err(|e| Error::format("snapshot", e.to_string()))
    }
}

pub trait Environment {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_kind(&self) -> ActionKind;
    fn max_steps(&self) -> usize;

    /// Generates a layout from `seed` and returns `o_0`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &Action) -> Result<StepOutcome>;
    fn observe(&self) -> Vec<f64>;
    fn is_done(&self) -> bool;
    /// Whether the task was completed in the current episode.
    fn succeeded(&self) -> bool;

    fn snapshot(&self) -> EnvSnapshot;
    fn restore(&mut self, snapshot: &EnvSnapshot) -> Result<()>;

    fn expert_action(&self) -> Result<Action>;

    /// A uniformly random action from the action space.
    fn random_action(&self, rng: &mut dyn rand::RngCore) -> Action {
        match self.action_kind() {
            ActionKind::Categorical => Action::Discrete(rng.gen_range(0..self.action_dim())),
            ActionKind::Continuous => {
                Action::Continuous((0..self.action_dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            }
        }
    }
}

/// The bundled environments, by CLI name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Grid,
    Points,
}

impl EnvKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "grid" | grid::NAME => Ok(EnvKind::Grid),
            "points" | points::NAME => Ok(EnvKind::Points),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::Grid => "grid",
            EnvKind::Points => "points",
        }
    }

    pub fn make(&self) -> Box<dyn Environment> {
        match self {
            EnvKind::Grid => Box::new(KeyDoorGrid::new(GridConfig::default())),
            EnvKind::Points => Box::new(PointGoals::new(PointsConfig::default())),
        }
    }
}

/// Runs one episode with `policy` choosing actions from the environment.
pub fn rollout<F>(env: &mut dyn Environment, seed: u64, mut policy: F) -> Result<Trajectory>
where
    F: FnMut(&dyn Environment, &Trajectory) -> Result<Action>,
{
    let mut traj = Trajectory::new(env.reset(seed));
    while !env.is_done() {
        let action = policy(&*env, &traj)?;
        let out = env.step(&action)?;
        traj.push(action, out.reward, out.observation);
    }
    Ok(traj)
}
