//! Imitation learning on top of the sequence model.
//!
//! Three network kinds are trained by behavioral cloning ([`bc_train`]): the
//! full latent-variable model and two latent-free recurrent baselines
//! ([`BaselineKind`]). Trained networks act in environments through
//! [`Actor`], are scored by [`evaluate`], and the full model's auxiliary
//! cost can be traced along an episode with [`subgoal_trace`].

mod agent;
pub mod baseline;
pub mod chart;
pub mod cli;
pub mod config;
mod eval;
mod train;

pub use agent::{act_from_model, Actor, TrainedModel};
pub use baseline::{RecurrentConfig, RecurrentNet};
pub use eval::{aux_trace, evaluate, evaluate_policy, mean_stderr, run_episode, subgoal_trace, EvalOptions, EvalReport, RolloutStats, SubgoalTrace};
pub use train::{bc_train, RecurrentTrainer, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// Recurrent network predicting only actions.
    RecurrentPolicy,
    /// Recurrent network predicting actions and the next observation.
    RecurrentDecoder,
    /// The latent-variable sequence model with its regularized ELBO.
    FullModel,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::RecurrentPolicy,
        BaselineKind::RecurrentDecoder,
        BaselineKind::FullModel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::RecurrentPolicy => "recurrent_policy",
            BaselineKind::RecurrentDecoder => "recurrent_decoder",
            BaselineKind::FullModel => "full_model",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

/// FNV-1a over the first and last observations and the length.
fn trajectory_hash(t: &Trajectory) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in t.observations.first().into_iter().flatten().chain(t.observations.last().into_iter().flatten()) {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h ^= t.len() as u64;
    h.wrapping_mul(0x0100_0000_01b3)
}

/// Splits trajectories into `(train, held_out)`, holding out roughly one in
/// ten by a content hash that does not depend on file order.
pub fn split_heldout(episodes: &[Trajectory]) -> (Vec<Trajectory>, Vec<Trajectory>) {
    episodes
        .iter()
        .cloned()
        .partition(|t| trajectory_hash(t) % 10 != 0)
}
