use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvEvent, EnvSnapshot, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::seqmodel::ActionKind;
use crate::trajectory::Action;

pub(crate) const NAME: &str = "point_goals";

#[derive(Clone, Debug, PartialEq)]
pub struct PointsConfig {
    /// Half-width of the square arena.
    pub arena: f64,
    pub dt: f64,
    pub n_goals: usize,
    pub goal_radius: f64,
    /// Per-axis speed limit.
    pub max_speed: f64,
    /// Each goal is placed at a distance in this range from the previous one.
    pub goal_spacing: (f64, f64),
    pub max_steps: usize,
    /// Proportional and derivative gains of the expert.
    pub expert_gains: (f64, f64),
}

impl Default for PointsConfig {
    fn default() -> Self {
        Self {
            arena: 5.0,
            dt: 0.1,
            n_goals: 5,
            goal_radius: 0.3,
            max_speed: 2.0,
            goal_spacing: (1.0, 2.5),
            max_steps: 200,
            expert_gains: (4.0, 2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointsState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub goals: Vec<[f64; 2]>,
    pub goals_reached: usize,
    pub steps: usize,
    pub done: bool,
}

impl PointsState {
    pub fn current_goal(&self) -> Option<[f64; 2]> {
        self.goals.get(self.goals_reached).copied()
    }
}

/// Point mass with bounded acceleration that must visit an ordered list of
/// goals. Reward 1 arrives each time the number of visited goals becomes a
/// multiple of three.
#[derive(Clone, Debug)]
pub struct PointGoals {
    config: PointsConfig,
    state: PointsState,
}

impl PointGoals {
    pub fn new(config: PointsConfig) -> Self {
        let mut env = Self {
            config,
            state: PointsState {
                position: [0.0; 2],
                velocity: [0.0; 2],
                goals: Vec::new(),
                goals_reached: 0,
                steps: 0,
                done: true,
            },
        };
        env.reset(0);
        env
    }

    pub fn config(&self) -> &PointsConfig {
        &self.config
    }

    pub fn state(&self) -> &PointsState {
        &self.state
    }

    pub fn set_state(&mut self, state: PointsState) -> Result<()> {
        if state.goals.len() != self.config.n_goals || state.goals_reached > state.goals.len() {
            return Err(Error::Env("state does not match the goal count".into()));
        }
        self.state = state;
        Ok(())
    }

    /// Planning reward on an observation: progress in goals minus the scaled
    /// distance to the current goal.
    pub fn shaped_reward(&self, obs: &[f64]) -> f64 {
        let a = self.config.arena;
        let dist = (obs[4] * obs[4] + obs[5] * obs[5]).sqrt() * a;
        3.0 * obs[6] * self.config.n_goals as f64 - dist
    }
}

impl Environment for PointGoals {
    fn name(&self) -> &'static str {
        NAME
    }

    fn obs_dim(&self) -> usize {
        7
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_kind(&self) -> ActionKind {
        ActionKind::Continuous
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &self.config;
        let start = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let bound = c.arena - 0.5;
        let mut goals = Vec::with_capacity(c.n_goals);
        let mut prev = start;
        while goals.len() < c.n_goals {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let dist = rng.gen_range(c.goal_spacing.0..c.goal_spacing.1);
            let g = [prev[0] + dist * angle.cos(), prev[1] + dist * angle.sin()];
            if g[0].abs() <= bound && g[1].abs() <= bound {
                goals.push(g);
                prev = g;
            }
        }
        self.state = PointsState {
            position: start,
            velocity: [0.0; 2],
            goals,
            goals_reached: 0,
            steps: 0,
            done: false,
        };
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::Contract("step after episode end".into()));
        }
        let a = match action {
            Action::Continuous(v) if v.len() == 2 && v.iter().all(|x| x.is_finite()) => {
                [v[0].clamp(-1.0, 1.0), v[1].clamp(-1.0, 1.0)]
            }
            other => return Err(Error::Env(format!("invalid point action {other:?}"))),
        };
        let c = &self.config;
        let s = &mut self.state;
        for k in 0..2 {
            s.position[k] += s.velocity[k] * c.dt;
            if s.position[k].abs() > c.arena {
                s.position[k] = s.position[k].clamp(-c.arena, c.arena);
                s.velocity[k] = 0.0;
            }
            s.velocity[k] = (s.velocity[k] + a[k] * c.dt).clamp(-c.max_speed, c.max_speed);
        }
        s.steps += 1;
        let mut reward = 0.0;
        let mut events = Vec::new();
        if let Some(g) = s.current_goal() {
            let d = ((g[0] - s.position[0]).powi(2) + (g[1] - s.position[1]).powi(2)).sqrt();
            if d < c.goal_radius {
                s.goals_reached += 1;
                events.push(EnvEvent::GoalReached);
                if s.goals_reached % 3 == 0 {
                    reward = 1.0;
                }
            }
        }
        if s.goals_reached == s.goals.len() || s.steps >= c.max_steps {
            s.done = true;
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done: self.state.done,
            events,
        })
    }

    /// `[p / arena, v, (g - p) / arena, reached / total]`; the goal offset is
    /// zero once every goal has been visited.
    fn observe(&self) -> Vec<f64> {
        let s = &self.state;
        let a = self.config.arena;
        let rel = s
            .current_goal()
            .map(|g| [(g[0] - s.position[0]) / a, (g[1] - s.position[1]) / a])
            .unwrap_or([0.0; 2]);
        vec![
            s.position[0] / a,
            s.position[1] / a,
            s.velocity[0],
            s.velocity[1],
            rel[0],
            rel[1],
            s.goals_reached as f64 / s.goals.len() as f64,
        ]
    }

    fn is_done(&self) -> bool {
        self.state.done
    }

    fn succeeded(&self) -> bool {
        self.state.goals_reached == self.state.goals.len()
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot::encode(NAME, &self.state)
    }

    fn restore(&mut self, snapshot: &EnvSnapshot) -> Result<()> {
        let state: PointsState = snapshot.decode(NAME)?;
        self.set_state(state)
    }

    /// PD control towards the current goal.
    fn expert_action(&self) -> Result<Action> {
        let s = &self.state;
        let g = s.current_goal().unwrap_or(s.position);
        let (kp, kd) = self.config.expert_gains;
        Ok(Action::Continuous(
            (0..2)
                .map(|k| (kp * (g[k] - s.position[k]) - kd * s.velocity[k]).clamp(-1.0, 1.0))
                .collect(),
        ))
    }
}
