//! Episodes: the unit of data exchanged between every module.

use crate::error::{Error, Result};

/// An action as stored in trajectories and datasets.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// One-hot for discrete actions, the raw vector otherwise.
    pub fn embed(&self, action_dim: usize) -> Vec<f64> {
        match self {
            Action::Discrete(i) => {
                let mut v = vec![0.0; action_dim];
                if *i < action_dim {
                    v[*i] = 1.0;
                }
                v
            }
            Action::Continuous(v) => v.clone(),
        }
    }

    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Continuous(_) => None,
        }
    }
}

/// One episode: observations `o_0..o_T`, actions `a_0..a_{T-1}` and the
/// reward received after each action.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn new(first_observation: Vec<f64>) -> Self {
        Self {
            observations: vec![first_observation],
            actions: Vec::new(),
            rewards: Vec::new(),
        }
    }

    pub fn push(&mut self, action: Action, reward: f64, observation: Vec<f64>) {
        self.actions.push(action);
        self.rewards.push(reward);
        self.observations.push(observation);
    }

    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.observations.len() != self.actions.len() + 1
            || self.rewards.len() != self.actions.len()
        {
            return Err(Error::dim(
                "trajectory",
                &[self.observations.len()],
                &[self.actions.len(), self.rewards.len()],
            ));
        }
        Ok(())
    }

    /// Transitions `start..end` as their own trajectory, starting at
    /// observation `o_start`.
    pub fn segment(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            observations: self.observations[start..=end].to_vec(),
            actions: self.actions[start..end].to_vec(),
            rewards: self.rewards[start..end].to_vec(),
        }
    }
}
