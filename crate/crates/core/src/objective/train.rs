use rand::Rng;

use super::{chunk_bounds, kl_schedule, total_loss_graph, LossBreakdown, ObjectiveConfig};
use crate::diffcore::{adam_step, AdamState, Graph};
use crate::error::{Error, Result};
use crate::seqmodel::{ForwardState, LatentMode, SeqModel};
use crate::trajectory::Trajectory;

pub fn metrics_header() -> &'static str {
    "iteration,total,obs_recon,act_recon,kl_total,aux_total,kl_weight"
}

impl LossBreakdown {
    pub fn csv_row(&self, iteration: u64) -> String {
        format!(
            "{iteration},{},{},{},{},{},{}",
            self.total, self.obs_recon, self.act_recon, self.kl_total, self.aux_total, self.kl_weight_used
        )
    }
}

/// Adam on the regularized ELBO, one optimizer step per batch.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: SeqModel,
    pub adam: AdamState,
    pub config: ObjectiveConfig,
    /// Optimizer steps taken so far; drives the KL schedule.
    pub iteration: u64,
    /// Switch the latent path off (`z_t = 0`), used for ablations.
    pub latent_disabled: bool,
}

impl Trainer {
    pub fn new(model: SeqModel, config: ObjectiveConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            adam: AdamState::new(config.learning_rate),
            model,
            config,
            iteration: 0,
            latent_disabled: false,
        })
    }

    /// Adds the gradient of the batch-mean loss into the model's parameter
    /// gradients and returns the batch-mean breakdown.
    pub fn accumulate<R: Rng + ?Sized>(&mut self, batch: &[Trajectory], rng: &mut R) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::Contract("empty training batch".into()));
        }
        let kl_weight = kl_schedule(self.iteration, &self.config);
        let weight = 1.0 / batch.len() as f64;
        let mode = if self.latent_disabled {
            LatentMode::Zero
        } else {
            LatentMode::Posterior
        };
        let mut mean = LossBreakdown::default();
        for traj in batch {
            let mut carried: Option<ForwardState> = None;
            for (start, end) in chunk_bounds(traj.len(), self.config.chunk_len) {
                let chunk = traj.segment(start, end);
                let mut g = Graph::new();
                let bound = self.model.bind(&mut g)?;
                let out = total_loss_graph(
                    &mut g,
                    &bound,
                    &chunk,
                    carried.as_ref(),
                    &self.config,
                    kl_weight,
                    mode,
                    rng,
                )?;
                let scaled = g.scale(out.total, weight);
                g.backward(scaled)?;
                g.accumulate_param_grads(&mut self.model.params);
                mean.add(&out.breakdown.scaled(weight));
                carried = Some(out.final_state);
            }
        }
        mean.kl_weight_used = kl_weight;
        Ok(mean)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, batch: &[Trajectory], rng: &mut R) -> Result<LossBreakdown> {
        let out = self.accumulate(batch, rng)?;
        adam_step(&mut self.model.params, &mut self.adam);
        self.iteration += 1;
        Ok(out)
    }
}
