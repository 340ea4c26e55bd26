use rand::Rng;
use rand_distr::StandardNormal;

use super::{reparameterize, ActionDist, Bound, ForwardState, GaussVars, StateVars};
use crate::diffcore::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Where the latents of a teacher-forced pass come from.
#[derive(Clone, Copy, Debug)]
pub enum LatentMode<'a> {
    /// One reparameterized posterior sample per step.
    Posterior,
    /// Fixed latents, e.g. the ones a generated rollout used.
    Given(&'a [Vec<f64>]),
    /// `z_t = 0`: the latent path is switched off.
    Zero,
}

/// Everything the objective needs about step `t`.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub h_prev: StateVars,
    pub prior: GaussVars,
    pub posterior: GaussVars,
    pub z: Var,
    /// Same value as `z`, but computed along a recurrence that only sees
    /// detached backward states, so the auxiliary cost built on it cannot
    /// reach the backward network.
    pub z_aux: Var,
    pub epsilon: Vec<f64>,
    /// `log p(o_t | a_{t-1}, h_{t-1}, z_t)`
    pub obs_ll: Var,
    /// `log p(a_{t-1} | h_{t-1}, z_t)`
    pub act_ll: Var,
    /// Backward hidden state `b_t`, still attached to the backward network.
    pub b: Var,
    pub obs_dist: GaussVars,
    pub act_dist: ActionDist,
}

pub struct TeacherForced {
    pub steps: Vec<StepRecord>,
    pub final_state: StateVars,
}

impl Bound<'_> {
    /// Scores a real trajectory step by step, feeding the true `o_t` into the
    /// transition. `init` is the state entering step 1; when absent the zero
    /// state is advanced by `o_0`.
    pub fn teacher_forced_pass<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        traj: &Trajectory,
        init: Option<&ForwardState>,
        latents: LatentMode<'_>,
        rng: &mut R,
    ) -> Result<TeacherForced> {
        traj.validate()?;
        if traj.is_empty() {
            return Err(Error::Contract("teacher-forced pass needs T >= 1".into()));
        }
        if let LatentMode::Given(zs) = latents {
            if zs.len() != traj.len() {
                return Err(Error::dim("given latents", &[traj.len()], &[zs.len()]));
            }
        }
        let cfg = self.config;
        let obs: Vec<Var> = traj.observations.iter().map(|o| g.constant_vec(o)).collect();
        let backward = self.backward_encode(g, &obs[1..])?;
        let mut state = match init {
            Some(s) => s.bind(g),
            None => self.initial_state(g, &traj.observations[0])?,
        };
        // Shadow recurrence driven only by detached backward states; it has
        // the same values as the main one and feeds `z_aux`.
        let mut aux_state = match latents {
            LatentMode::Posterior if !g.is_inference() => Some(state),
            _ => None,
        };
        let mut steps = Vec::with_capacity(traj.len());
        for t in 1..=traj.len() {
            let h_prev = state;
            let b = backward[t - 1].h;
            let prior = self.prior(g, &h_prev)?;
            let posterior = self.posterior(g, &h_prev, b)?;
            let (z, z_aux, epsilon) = match latents {
                LatentMode::Posterior => {
                    let eps: Vec<f64> = (0..cfg.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
                    let z = reparameterize(g, &posterior, &eps)?;
                    let z_aux = match aux_state.as_mut() {
                        Some(shadow) => {
                            let b_stop = g.detach(b);
                            let cut = self.posterior(g, shadow, b_stop)?;
                            let z_aux = reparameterize(g, &cut, &eps)?;
                            *shadow = self.forward_transition(g, obs[t], shadow, z_aux)?;
                            z_aux
                        }
                        None => z,
                    };
                    (z, z_aux, eps)
                }
                LatentMode::Given(zs) => {
                    let z = g.constant_vec(&zs[t - 1]);
                    (z, z, Vec::new())
                }
                LatentMode::Zero => {
                    let z = g.constant(Tensor::zeros(&[cfg.latent_dim]));
                    (z, z, Vec::new())
                }
            };
            let action = &traj.actions[t - 1];
            let a_embed = g.constant_vec(&action.embed(cfg.action_dim));
            let obs_dist = self.decode_observation(g, a_embed, &h_prev, z)?;
            let obs_ll = g.gaussian_logpdf(obs[t], obs_dist.mean, obs_dist.log_std)?;
            let act_dist = self.decode_action(g, &h_prev, z)?;
            let act_ll = act_dist.log_likelihood(g, action)?;
            state = self.forward_transition(g, obs[t], &h_prev, z)?;
            steps.push(StepRecord {
                h_prev,
                prior,
                posterior,
                z,
                z_aux,
                epsilon,
                obs_ll,
                act_ll,
                b,
                obs_dist,
                act_dist,
            });
        }
        Ok(TeacherForced {
            steps,
            final_state: state,
        })
    }
}
