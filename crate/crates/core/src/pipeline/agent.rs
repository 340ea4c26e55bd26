use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use super::baseline::{bind_recurrent, BoundRecurrent, RecurrentConfig, RecurrentNet};
use super::BaselineKind;
use crate::diffcore::Graph;
use crate::error::{Error, Result};
use crate::seqmodel::{
    bind_params, read_checkpoint, reparameterize_values, write_checkpoint, Bound, Checkpoint, DecodeMode, ForwardState,
    ModelConfig, SeqModel,
};
use crate::trajectory::{Action, Trajectory};

/// A trained network of any kind.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Full(SeqModel),
    Recurrent(RecurrentNet),
}

impl TrainedModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            TrainedModel::Full(_) => BaselineKind::FullModel,
            TrainedModel::Recurrent(r) if r.config.predict_obs => BaselineKind::RecurrentDecoder,
            TrainedModel::Recurrent(_) => BaselineKind::RecurrentPolicy,
        }
    }

    pub fn params(&self) -> &crate::diffcore::ParamStore {
        match self {
            TrainedModel::Full(m) => &m.params,
            TrainedModel::Recurrent(r) => &r.params,
        }
    }

    pub fn as_full(&self) -> Result<&SeqModel> {
        match self {
            TrainedModel::Full(m) => Ok(m),
            _ => Err(Error::Contract(format!("{} checkpoint is not a full model", self.kind().as_str()))),
        }
    }

    pub fn to_checkpoint(&self, extra: &[(String, String)]) -> Checkpoint {
        let mut header = vec![("kind".to_string(), self.kind().as_str().to_string())];
        header.extend(match self {
            TrainedModel::Full(m) => m.config.to_pairs(),
            TrainedModel::Recurrent(r) => r.config.to_pairs(),
        });
        header.extend(extra.iter().cloned());
        Checkpoint {
            header,
            params: self.params().clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let kind = BaselineKind::parse(
            ckpt.get("kind")
                .ok_or_else(|| Error::format("checkpoint header", "missing `kind`"))?,
        )?;
        Ok(match kind {
            BaselineKind::FullModel => TrainedModel::Full(SeqModel::from_parts(
                ModelConfig::from_pairs(&ckpt.header)?,
                ckpt.params.clone(),
            )?),
            _ => TrainedModel::Recurrent(RecurrentNet::from_parts(
                RecurrentConfig::from_pairs(&ckpt.header)?,
                ckpt.params.clone(),
            )?),
        })
    }

    pub fn save<W: Write>(&self, extra: &[(String, String)], out: W) -> Result<()> {
        write_checkpoint(&self.to_checkpoint(extra), out)
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        Self::from_checkpoint(&read_checkpoint(input)?)
    }

    pub fn actor(&self) -> Result<Actor<'_>> {
        Actor::new(self)
    }
}

enum Net<'m> {
    Full(Bound<'m>),
    Recurrent(BoundRecurrent),
}

/// Runs a trained model step by step in an environment.
///
/// Call [`Actor::begin`] with `o_0`, then alternate [`Actor::act`] and
/// [`Actor::observe`]. The full model draws `z_t` from its sequential prior
/// before each action and feeds that latent into the transition.
pub struct Actor<'m> {
    g: Graph,
    net: Net<'m>,
    mark: usize,
    state: Option<ForwardState>,
    latent: Option<Vec<f64>>,
}

impl<'m> Actor<'m> {
    pub fn new(model: &'m TrainedModel) -> Result<Self> {
        match model {
            TrainedModel::Full(m) => Self::full(m),
            TrainedModel::Recurrent(r) => Self::recurrent(r),
        }
    }

    pub fn full(model: &'m SeqModel) -> Result<Self> {
        let mut g = Graph::inference();
        let net = Net::Full(bind_params(&model.config, &model.params, &mut g)?);
        Ok(Self::with_net(g, net))
    }

    pub fn recurrent(net: &RecurrentNet) -> Result<Self> {
        let mut g = Graph::inference();
        let net = Net::Recurrent(bind_recurrent(&net.config, &net.params, &mut g)?);
        Ok(Self::with_net(g, net))
    }

    fn with_net(g: Graph, net: Net<'m>) -> Self {
        let mark = g.len();
        Self {
            g,
            net,
            mark,
            state: None,
            latent: None,
        }
    }

    pub fn begin(&mut self, o0: &[f64]) -> Result<()> {
        self.g.truncate(self.mark);
        let s = match &self.net {
            Net::Full(b) => b.initial_state(&mut self.g, o0)?,
            Net::Recurrent(b) => {
                let zero = b.zero_state(&mut self.g);
                let o = self.g.constant_vec(o0);
                b.step(&mut self.g, o, &zero)?
            }
        };
        self.state = Some(ForwardState::read(&self.g, &s));
        self.latent = None;
        Ok(())
    }

    fn current(&self) -> Result<&ForwardState> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::Contract("actor used before begin".into()))
    }

    pub fn act<R: Rng + ?Sized>(&mut self, mode: DecodeMode, rng: &mut R) -> Result<Action> {
        let state = self.current()?.clone();
        self.g.truncate(self.mark);
        let g = &mut self.g;
        let s = state.bind(g);
        let dist = match &self.net {
            Net::Full(b) => {
                let prior = b.prior(g, &s)?.read(g);
                let eps: Vec<f64> = (0..b.config.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
                let z = reparameterize_values(&prior, &eps);
                let zv = g.constant_vec(&z);
                self.latent = Some(z);
                b.decode_action(g, &s, zv)?
            }
            Net::Recurrent(b) => b.decode_action(g, &s)?,
        };
        let action = match mode {
            DecodeMode::Mode => dist.mode(g),
            DecodeMode::Sample => dist.sample(g, rng),
        };
        Ok(match action {
            Action::Continuous(v) => Action::Continuous(v.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect()),
            discrete => discrete,
        })
    }

    /// Advances the recurrent state with the observation that followed the
    /// last action.
    pub fn observe(&mut self, o: &[f64]) -> Result<()> {
        let state = self.current()?.clone();
        self.g.truncate(self.mark);
        let g = &mut self.g;
        let s = state.bind(g);
        let o = g.constant_vec(o);
        let next = match &self.net {
            Net::Full(b) => {
                let z = self
                    .latent
                    .take()
                    .ok_or_else(|| Error::Contract("observe before act".into()))?;
                let z = g.constant_vec(&z);
                b.forward_transition(g, o, &s, z)?
            }
            Net::Recurrent(b) => b.step(g, o, &s)?,
        };
        self.state = Some(ForwardState::read(g, &next));
        Ok(())
    }
}

/// Action for the last observation of `history`, replaying the history
/// through the model first. Full-model latents along the history are drawn
/// from the prior.
pub fn act_from_model<R: Rng + ?Sized>(
    model: &TrainedModel,
    history: &Trajectory,
    mode: DecodeMode,
    rng: &mut R,
) -> Result<Action> {
    let mut actor = model.actor()?;
    actor.begin(&history.observations[0])?;
    for o in &history.observations[1..] {
        actor.act(mode, rng)?;
        actor.observe(o)?;
    }
    actor.act(mode, rng)
}
