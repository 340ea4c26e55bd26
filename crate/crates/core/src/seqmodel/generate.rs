use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    reparameterize_values, Bound, ForwardState, LatentSample, LatentSource, SeqModel,
};
use crate::diffcore::Graph;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    Sample,
    /// Mean for Gaussians, argmax for categoricals.
    Mode,
}

#[derive(Clone, Copy, Debug)]
pub struct GenerateOptions<'a> {
    /// Use these latents instead of sampling the prior.
    pub latents: Option<&'a [Vec<f64>]>,
    pub action_mode: DecodeMode,
    pub obs_mode: DecodeMode,
}

impl Default for GenerateOptions<'_> {
    fn default() -> Self {
        Self {
            latents: None,
            action_mode: DecodeMode::Sample,
            obs_mode: DecodeMode::Sample,
        }
    }
}

/// An imagined rollout.
#[derive(Clone, Debug)]
pub struct Generated {
    pub trajectory: Trajectory,
    pub latents: Vec<LatentSample>,
    /// Observation decoder means, one per step.
    pub obs_means: Vec<Vec<f64>>,
    pub final_state: ForwardState,
}

impl Bound<'_> {
    /// Ancestral sampling from `(o_0, h_0)` for `steps` steps. `h_0` is the
    /// state entering step 1.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        o0: &[f64],
        h0: &ForwardState,
        steps: usize,
        rng: &mut R,
        opts: GenerateOptions<'_>,
    ) -> Result<Generated> {
        if steps < 1 {
            return Err(Error::Contract("generate needs T >= 1".into()));
        }
        if let Some(zs) = opts.latents {
            if zs.len() < steps {
                return Err(Error::dim("generate latents", &[steps], &[zs.len()]));
            }
        }
        let cfg = self.config;
        let mut state = h0.bind(g);
        let mut trajectory = Trajectory::new(o0.to_vec());
        let mut latents = Vec::with_capacity(steps);
        let mut obs_means = Vec::with_capacity(steps);
        for t in 0..steps {
            let sample = match opts.latents {
                Some(zs) => LatentSample {
                    z: zs[t].clone(),
                    epsilon: Vec::new(),
                    source: LatentSource::Prior,
                },
                None => {
                    let prior = self.prior(g, &state)?.read(g);
                    let epsilon: Vec<f64> =
                        (0..cfg.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
                    LatentSample {
                        z: reparameterize_values(&prior, &epsilon),
                        epsilon,
                        source: LatentSource::Prior,
                    }
                }
            };
            let z = g.constant_vec(&sample.z);
            let act_dist = self.decode_action(g, &state, z)?;
            let action = match opts.action_mode {
                DecodeMode::Sample => act_dist.sample(g, rng),
                DecodeMode::Mode => act_dist.mode(g),
            };
            let a_embed = g.constant_vec(&action.embed(cfg.action_dim));
            let obs_dist = self.decode_observation(g, a_embed, &state, z)?.read(g);
            let o = match opts.obs_mode {
                DecodeMode::Sample => obs_dist.sample(rng).z,
                DecodeMode::Mode => obs_dist.mean.clone(),
            };
            let o_var = g.constant_vec(&o);
            state = self.forward_transition(g, o_var, &state, z)?;
            obs_means.push(obs_dist.mean);
            trajectory.push(action, 0.0, o);
            latents.push(sample);
        }
        Ok(Generated {
            trajectory,
            latents,
            obs_means,
            final_state: ForwardState::read(g, &state),
        })
    }
}

impl SeqModel {
    pub fn generate<R: Rng + ?Sized>(
        &self,
        o0: &[f64],
        h0: &ForwardState,
        steps: usize,
        rng: &mut R,
        opts: GenerateOptions<'_>,
    ) -> Result<Generated> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        m.generate(&mut g, o0, h0, steps, rng, opts)
    }
}

