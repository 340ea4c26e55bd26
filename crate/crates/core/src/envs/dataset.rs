//! Plain-text trajectory files.
//!
//! ```text
//! LHDS 1 <obs_dim> <action_dim> <action_kind>
//! EP <T>
//! <T + 1 observation lines>
//! <T action lines>
//! <T reward lines>
//! ```
//!
//! Values are space separated and printed in shortest round-trip form, so a
//! file read back and written again is byte-identical.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rollout, Environment};
use crate::error::{Error, Result};
use crate::seqmodel::ActionKind;
use crate::trajectory::{Action, Trajectory};

const MAGIC: &str = "LHDS";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_kind: ActionKind,
    pub episodes: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(obs_dim: usize, action_dim: usize, action_kind: ActionKind) -> Self {
        Self {
            obs_dim,
            action_dim,
            action_kind,
            episodes: Vec::new(),
        }
    }

    pub fn for_env(env: &dyn Environment) -> Self {
        Self::new(env.obs_dim(), env.action_dim(), env.action_kind())
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Checks every episode against the header dimensions.
    pub fn validate(&self) -> Result<()> {
        for t in &self.episodes {
            t.validate()?;
            if let Some(o) = t.observations.iter().find(|o| o.len() != self.obs_dim) {
                return Err(Error::dim("dataset observation", &[self.obs_dim], &[o.len()]));
            }
            for a in &t.actions {
                let ok = match (a, self.action_kind) {
                    (Action::Discrete(i), ActionKind::Categorical) => *i < self.action_dim,
                    (Action::Continuous(v), ActionKind::Continuous) => v.len() == self.action_dim,
                    _ => false,
                };
                if !ok {
                    return Err(Error::format("dataset", format!("action {a:?} does not fit the header")));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{MAGIC} {VERSION} {} {} {}",
            self.obs_dim,
            self.action_dim,
            self.action_kind.as_str()
        );
        let line = |s: &mut String, v: &[f64]| {
            let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        };
        for t in &self.episodes {
            let _ = writeln!(s, "EP {}", t.len());
            for o in &t.observations {
                line(&mut s, o);
            }
            for a in &t.actions {
                match a {
                    Action::Discrete(i) => {
                        let _ = writeln!(s, "{i}");
                    }
                    Action::Continuous(v) => line(&mut s, v),
                }
            }
            for r in &t.rewards {
                let _ = writeln!(s, "{r}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        read_dataset(text.as_bytes())
    }
}

fn parse_floats(line: &str, want: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = line
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format("dataset", format!("bad {what} line `{line}`")))?;
    if v.len() != want {
        return Err(Error::format(
            "dataset",
            format!("{what} line has {} values, expected {want}", v.len()),
        ));
    }
    Ok(v)
}

pub fn write_dataset<W: Write>(mut out: W, data: &Dataset) -> Result<()> {
    data.validate()?;
    out.write_all(data.to_text().as_bytes())?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut lines = BufReader::new(input).lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format("dataset", format!("unexpected end of file reading {what}")))
    };
    let header = next("header")?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != MAGIC {
        return Err(Error::format("dataset", format!("bad header `{header}`")));
    }
    if h[1] != VERSION.to_string() {
        return Err(Error::format("dataset", format!("unsupported version {}", h[1])));
    }
    let num = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::format("dataset", format!("bad number `{s}`")))
    };
    let mut data = Dataset::new(num(h[2])?, num(h[3])?, ActionKind::parse(h[4])?);
    loop {
        let ep = match next("episode") {
            Ok(l) if l.trim().is_empty() => continue,
            Ok(l) => l,
            Err(Error::Format { .. }) => break,
            Err(e) => return Err(e),
        };
        let len = match ep.strip_prefix("EP ") {
            Some(n) => num(n.trim())?,
            None => return Err(Error::format("dataset", format!("expected `EP <T>`, got `{ep}`"))),
        };
        let mut observations = Vec::with_capacity(len + 1);
        for _ in 0..=len {
            observations.push(parse_floats(&next("observation")?, data.obs_dim, "observation")?);
        }
        let mut actions = Vec::with_capacity(len);
        for _ in 0..len {
            let l = next("action")?;
            actions.push(match data.action_kind {
                ActionKind::Categorical => Action::Discrete(num(l.trim())?),
                ActionKind::Continuous => Action::Continuous(parse_floats(&l, data.action_dim, "action")?),
            });
        }
        let mut rewards = Vec::with_capacity(len);
        for _ in 0..len {
            rewards.push(parse_floats(&next("reward")?, 1, "reward")?[0]);
        }
        data.episodes.push(Trajectory {
            observations,
            actions,
            rewards,
        });
    }
    data.validate()?;
    Ok(data)
}

/// Loads a dataset file, reporting a missing path as such.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_dataset(file)
}

/// One expert episode from the layout generated by `seed`.
pub fn rollout_expert(env: &mut dyn Environment, seed: u64) -> Result<Trajectory> {
    rollout(env, seed, |e, _| e.expert_action())
}

/// `n` expert episodes with layout seeds drawn from `seed`.
pub fn generate_dataset(env: &mut dyn Environment, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Contract("dataset needs at least one trajectory".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::for_env(env);
    for _ in 0..n {
        let episode_seed: u64 = rng.gen();
        data.episodes.push(rollout_expert(env, episode_seed)?);
    }
    Ok(data)
}
