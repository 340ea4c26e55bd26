//! Latent-variable sequence models whose latents are trained to predict a
//! summary of the long-term future, plus the machinery for using them:
//! latent-space model-predictive control, negative-ELBO exploration and
//! behavioral cloning.
//!
//! Module map:
//!
//! - [`diffcore`]: reverse-mode autodiff, parameters, Adam, gradient checks.
//! - [`seqmodel`]: the stochastic recurrent model and its inference network.
//! - [`objective`]: regularized ELBO, KL annealing, importance-weighted NLL.
//! - [`envs`]: key-door gridworld and multi-goal point navigation.
//! - [`planner`]: MPC over sampled latent sequences.
//! - [`explorer`]: exploration policy, replay buffer, PPO, the outer loop.
//! - [`pipeline`]: imitation training, baselines, evaluation, CLI plumbing.

pub mod diffcore;
pub mod error;

pub use error::{Error, Result};
pub mod seqmodel;
pub mod trajectory;
pub mod objective;
pub mod envs;
pub mod pipeline;
pub mod planner;
pub mod explorer;
