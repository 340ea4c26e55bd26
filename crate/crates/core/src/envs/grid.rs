use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvEvent, EnvSnapshot, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::seqmodel::ActionKind;
use crate::trajectory::Action;

pub(crate) const NAME: &str = "key_door_grid";

/// Number of discrete actions: forward, turn left, turn right, pickup, toggle.
pub const GRID_ACTIONS: usize = 5;
const FORWARD: usize = 0;
const LEFT: usize = 1;
const RIGHT: usize = 2;
const PICKUP: usize = 3;
const TOGGLE: usize = 4;

/// Observation channels, in encoding order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Key,
    DoorLocked,
    DoorOpen,
    Goal,
    Empty,
}

const CHANNELS: usize = 6;

impl Cell {
    fn channel(self) -> usize {
        self as usize
    }

    fn passable(self) -> bool {
        matches!(self, Cell::Empty | Cell::DoorOpen | Cell::Goal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    /// Side of the square egocentric view; odd.
    pub view: usize,
    pub max_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 9,
            height: 7,
            view: 3,
            max_steps: 80,
        }
    }
}

/// Full state of the key-door grid. Coordinates are `(x, y)` with `y`
/// growing downwards; headings are 0 east, 1 south, 2 west, 3 north.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridState {
    pub width: usize,
    pub height: usize,
    pub agent: (usize, usize),
    pub heading: u8,
    /// `None` once the key is carried.
    pub key: Option<(usize, usize)>,
    pub door: (usize, usize),
    pub door_locked: bool,
    pub goal: (usize, usize),
    pub steps: usize,
    pub max_steps: usize,
    pub done: bool,
    pub success: bool,
}

impl GridState {
    pub fn carrying(&self) -> bool {
        self.key.is_none()
    }

    /// Column of the dividing wall.
    pub fn wall_x(&self) -> usize {
        self.width / 2
    }

    pub fn cell(&self, x: i64, y: i64) -> Cell {
        if x <= 0 || y <= 0 || x >= self.width as i64 - 1 || y >= self.height as i64 - 1 {
            return Cell::Wall;
        }
        let p = (x as usize, y as usize);
        if p == self.door {
            return if self.door_locked {
                Cell::DoorLocked
            } else {
                Cell::DoorOpen
            };
        }
        if p.0 == self.wall_x() {
            return Cell::Wall;
        }
        if Some(p) == self.key {
            return Cell::Key;
        }
        if p == self.goal {
            return Cell::Goal;
        }
        Cell::Empty
    }

    fn front(&self, pos: (usize, usize), heading: u8) -> (i64, i64) {
        let (dx, dy) = direction(heading);
        (pos.0 as i64 + dx, pos.1 as i64 + dy)
    }

    /// The egocentric view plus carried bit. Row 0 is farthest ahead,
    /// column 0 is to the agent's left.
    pub fn observation(&self, view: usize) -> Vec<f64> {
        let half = (view / 2) as i64;
        let (fx, fy) = direction(self.heading);
        let (rx, ry) = direction((self.heading + 1) % 4);
        let mut obs = vec![0.0; view * view * CHANNELS + 1];
        for r in 0..view {
            for c in 0..view {
                let ahead = half - r as i64;
                let lateral = c as i64 - half;
                let x = self.agent.0 as i64 + ahead * fx + lateral * rx;
                let y = self.agent.1 as i64 + ahead * fy + lateral * ry;
                let cell = self.cell(x, y);
                obs[(r * view + c) * CHANNELS + cell.channel()] = 1.0;
            }
        }
        obs[view * view * CHANNELS] = if self.carrying() { 1.0 } else { 0.0 };
        obs
    }

    /// Shortest sequence length from the agent's pose to any pose satisfying
    /// `target`, and the first action on it.
    fn plan(&self, target: impl Fn(&GridState, (usize, usize), u8) -> bool) -> Option<(usize, usize)> {
        let idx = |p: (usize, usize), h: u8| (p.1 * self.width + p.0) * 4 + h as usize;
        let mut first = vec![usize::MAX; self.width * self.height * 4];
        let mut dist = vec![usize::MAX; self.width * self.height * 4];
        let start = (self.agent, self.heading);
        if target(self, start.0, start.1) {
            return Some((0, usize::MAX));
        }
        dist[idx(start.0, start.1)] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some((p, h)) = queue.pop_front() {
            let d = dist[idx(p, h)];
            for a in [FORWARD, LEFT, RIGHT] {
                let next = match a {
                    FORWARD => {
                        let (x, y) = self.front(p, h);
                        if !self.cell(x, y).passable() {
                            continue;
                        }
                        ((x as usize, y as usize), h)
                    }
                    LEFT => (p, (h + 3) % 4),
                    _ => (p, (h + 1) % 4),
                };
                let k = idx(next.0, next.1);
                if dist[k] != usize::MAX {
                    continue;
                }
                dist[k] = d + 1;
                first[k] = if d == 0 { a } else { first[idx(p, h)] };
                if target(self, next.0, next.1) {
                    return Some((d + 1, first[k]));
                }
                queue.push_back(next);
            }
        }
        None
    }

    /// Remaining expert steps to finish the task, if it can be finished.
    pub fn expert_plan_length(&self) -> Option<usize> {
        let mut s = self.clone();
        let mut n = 0;
        while !s.success {
            let a = s.expert()?;
            s.apply(a);
            n += 1;
            if n > 4 * self.width * self.height * 4 {
                return None;
            }
        }
        Some(n)
    }

    fn expert(&self) -> Option<usize> {
        let facing = |want: (usize, usize)| {
            move |s: &GridState, p: (usize, usize), h: u8| s.front(p, h) == (want.0 as i64, want.1 as i64)
        };
        let (len, first) = match self.key {
            Some(key) => {
                let r = self.plan(facing(key))?;
                if r.0 == 0 {
                    return Some(PICKUP);
                }
                r
            }
            None if self.door_locked => {
                let r = self.plan(facing(self.door))?;
                if r.0 == 0 {
                    return Some(TOGGLE);
                }
                r
            }
            None => {
                let goal = self.goal;
                self.plan(move |_, p, _| p == goal)?
            }
        };
        debug_assert!(len > 0);
        Some(first)
    }

    /// Applies an action without the done/limit bookkeeping.
    fn apply(&mut self, action: usize) -> (f64, Vec<EnvEvent>) {
        let mut events = Vec::new();
        match action {
            FORWARD => {
                let (x, y) = self.front(self.agent, self.heading);
                let cell = self.cell(x, y);
                if cell.passable() {
                    self.agent = (x as usize, y as usize);
                    if cell == Cell::Goal {
                        self.success = true;
                        events.push(EnvEvent::GoalReached);
                    }
                }
            }
            LEFT => self.heading = (self.heading + 3) % 4,
            RIGHT => self.heading = (self.heading + 1) % 4,
            PICKUP => {
                let (x, y) = self.front(self.agent, self.heading);
                if self.cell(x, y) == Cell::Key {
                    self.key = None;
                    events.push(EnvEvent::KeyPickedUp);
                }
            }
            _ => {
                let (x, y) = self.front(self.agent, self.heading);
                if self.cell(x, y) == Cell::DoorLocked && self.carrying() {
                    self.door_locked = false;
                    events.push(EnvEvent::DoorUnlocked);
                }
            }
        }
        (0.0, events)
    }
}

fn direction(heading: u8) -> (i64, i64) {
    match heading % 4 {
        0 => (1, 0),
        1 => (0, 1),
        2 => (-1, 0),
        _ => (0, -1),
    }
}

/// Two-room gridworld: the agent and key start in the left room, the goal is
/// in the right room behind a locked door.
#[derive(Clone, Debug)]
pub struct KeyDoorGrid {
    config: GridConfig,
    state: GridState,
}

impl KeyDoorGrid {
    pub fn new(config: GridConfig) -> Self {
        assert!(config.view % 2 == 1, "grid view must be odd");
        assert!(config.width >= 7 && config.height >= 4, "grid too small for two rooms");
        let mut env = Self {
            state: GridState {
                width: config.width,
                height: config.height,
                agent: (1, 1),
                heading: 0,
                key: None,
                door: (0, 0),
                door_locked: true,
                goal: (0, 0),
                steps: 0,
                max_steps: config.max_steps,
                done: true,
                success: false,
            },
            config,
        };
        env.reset(0);
        env
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    /// Replaces the full state, e.g. to build hand-made layouts.
    pub fn set_state(&mut self, state: GridState) -> Result<()> {
        if state.width != self.config.width || state.height != self.config.height {
            return Err(Error::Env("state does not match grid size".into()));
        }
        self.state = state;
        Ok(())
    }

    fn layout(&self, rng: &mut ChaCha8Rng) -> GridState {
        let (w, h) = (self.config.width, self.config.height);
        let wall_x = w / 2;
        let left = |rng: &mut ChaCha8Rng| (rng.gen_range(1..wall_x), rng.gen_range(1..h - 1));
        let agent = left(rng);
        let key = loop {
            let k = left(rng);
            if k != agent {
                break k;
            }
        };
        GridState {
            width: w,
            height: h,
            agent,
            heading: rng.gen_range(0..4),
            key: Some(key),
            door: (wall_x, rng.gen_range(1..h - 1)),
            door_locked: true,
            goal: (rng.gen_range(wall_x + 1..w - 1), rng.gen_range(1..h - 1)),
            steps: 0,
            max_steps: self.config.max_steps,
            done: false,
            success: false,
        }
    }
}

impl Environment for KeyDoorGrid {
    fn name(&self) -> &'static str {
        NAME
    }

    fn obs_dim(&self) -> usize {
        self.config.view * self.config.view * CHANNELS + 1
    }

    fn action_dim(&self) -> usize {
        GRID_ACTIONS
    }

    fn action_kind(&self) -> ActionKind {
        ActionKind::Categorical
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let s = self.layout(&mut rng);
            // reject layouts the expert cannot finish in time
            if s.expert_plan_length().is_some_and(|n| n <= self.config.max_steps) {
                self.state = s;
                break;
            }
        }
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::Contract("step after episode end".into()));
        }
        let a = match action {
            Action::Discrete(a) if *a < GRID_ACTIONS => *a,
            other => return Err(Error::Env(format!("invalid grid action {other:?}"))),
        };
        let (_, events) = self.state.apply(a);
        self.state.steps += 1;
        let mut reward = 0.0;
        if self.state.success {
            reward = 1.0 - 0.9 * self.state.steps as f64 / self.state.max_steps as f64;
            self.state.done = true;
        } else if self.state.steps >= self.state.max_steps {
            self.state.done = true;
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done: self.state.done,
            events,
        })
    }

    fn observe(&self) -> Vec<f64> {
        self.state.observation(self.config.view)
    }

    fn is_done(&self) -> bool {
        self.state.done
    }

    fn succeeded(&self) -> bool {
        self.state.success
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot::encode(NAME, &self.state)
    }

    fn restore(&mut self, snapshot: &EnvSnapshot) -> Result<()> {
        let state: GridState = snapshot.decode(NAME)?;
        self.set_state(state)
    }

    fn expert_action(&self) -> Result<Action> {
        self.state
            .expert()
            .map(Action::Discrete)
            .ok_or_else(|| Error::Env("no expert plan from this grid state".into()))
    }
}
