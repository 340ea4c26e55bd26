use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::TrainedModel;
use super::baseline::{RecurrentConfig, RecurrentNet};
use super::BaselineKind;
use crate::diffcore::{adam_step, AdamState, Graph};
use crate::envs::Dataset;
use crate::error::{Error, Result};
use crate::objective::{metrics_header, LossBreakdown, ObjectiveConfig, Trainer};
use crate::seqmodel::{ModelConfig, SeqModel, LOG_STD_MIN};
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub kind: BaselineKind,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub backward_hidden_dim: usize,
    pub decoder_hidden_dims: Vec<usize>,
    pub obs_log_std_min: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub objective: ObjectiveConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: BaselineKind::FullModel,
            hidden_dim: 32,
            latent_dim: 8,
            backward_hidden_dim: 32,
            decoder_hidden_dims: vec![32],
            obs_log_std_min: LOG_STD_MIN,
            epochs: 10,
            batch_size: 16,
            objective: ObjectiveConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self, data: &Dataset) -> ModelConfig {
        ModelConfig {
            obs_dim: data.obs_dim,
            action_dim: data.action_dim,
            action_kind: data.action_kind,
            latent_dim: self.latent_dim,
            hidden_dim: self.hidden_dim,
            backward_hidden_dim: self.backward_hidden_dim,
            decoder_hidden_dims: self.decoder_hidden_dims.clone(),
            obs_log_std_min: self.obs_log_std_min,
        }
    }

    pub fn recurrent_config(&self, data: &Dataset) -> RecurrentConfig {
        RecurrentConfig {
            obs_dim: data.obs_dim,
            action_dim: data.action_dim,
            action_kind: data.action_kind,
            hidden_dim: self.hidden_dim,
            decoder_hidden_dims: self.decoder_hidden_dims.clone(),
            predict_obs: self.kind == BaselineKind::RecurrentDecoder,
            obs_log_std_min: self.obs_log_std_min,
        }
    }

    /// Fresh, untrained network of the configured kind.
    pub fn init_model(&self, data: &Dataset, rng: &mut ChaCha8Rng) -> Result<TrainedModel> {
        Ok(match self.kind {
            BaselineKind::FullModel => TrainedModel::Full(SeqModel::new(self.model_config(data), rng)?),
            _ => TrainedModel::Recurrent(RecurrentNet::new(self.recurrent_config(data), rng)?),
        })
    }
}

/// Adam on the maximum-likelihood loss of a recurrent baseline.
#[derive(Clone, Debug)]
pub struct RecurrentTrainer {
    pub net: RecurrentNet,
    pub adam: AdamState,
    pub iteration: u64,
}

impl RecurrentTrainer {
    pub fn new(net: RecurrentNet, learning_rate: f64) -> Self {
        Self {
            net,
            adam: AdamState::new(learning_rate),
            iteration: 0,
        }
    }

    /// One optimizer step on the batch-mean loss.
    pub fn step(&mut self, batch: &[Trajectory]) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::Contract("empty training batch".into()));
        }
        let weight = 1.0 / batch.len() as f64;
        let mut mean = LossBreakdown::default();
        for traj in batch {
            let mut g = Graph::new();
            let b = self.net.bind(&mut g)?;
            let loss = b.loss_graph(&mut g, traj)?;
            let scaled = g.scale(loss.total, weight);
            g.backward(scaled)?;
            g.accumulate_param_grads(&mut self.net.params);
            mean.add(&loss.breakdown(&g).scaled(weight));
        }
        adam_step(&mut self.net.params, &mut self.adam);
        self.iteration += 1;
        Ok(mean)
    }
}

/// Result of [`bc_train`]: the model and one metrics CSV row per optimizer
/// step, header included.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub metrics: Vec<String>,
}

impl TrainOutcome {
    pub fn metrics_csv(&self) -> String {
        let mut s = self.metrics.join("\n");
        s.push('\n');
        s
    }
}

/// Behavioral cloning of the dataset's trajectories with the configured
/// network kind. Deterministic given `config.seed`.
pub fn bc_train(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::Contract("cannot train on an empty dataset".into()));
    }
    data.validate()?;
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = config.init_model(data, &mut rng)?;
    let mut metrics = vec![metrics_header().to_string()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let model = match model {
        TrainedModel::Full(m) => {
            let mut trainer = Trainer::new(m, config.objective.clone())?;
            for _ in 0..config.epochs {
                order.shuffle(&mut rng);
                for idx in order.chunks(config.batch_size) {
                    let batch: Vec<Trajectory> = idx.iter().map(|i| data.episodes[*i].clone()).collect();
                    let it = trainer.iteration;
                    let b = trainer.step(&batch, &mut rng)?;
                    metrics.push(b.csv_row(it));
                }
            }
            TrainedModel::Full(trainer.model)
        }
        TrainedModel::Recurrent(net) => {
            let mut trainer = RecurrentTrainer::new(net, config.objective.learning_rate);
            for _ in 0..config.epochs {
                order.shuffle(&mut rng);
                for idx in order.chunks(config.batch_size) {
                    let batch: Vec<Trajectory> = idx.iter().map(|i| data.episodes[*i].clone()).collect();
                    let it = trainer.iteration;
                    let b = trainer.step(&batch)?;
                    metrics.push(b.csv_row(it));
                }
            }
            TrainedModel::Recurrent(trainer.net)
        }
    };
    Ok(TrainOutcome { model, metrics })
}
