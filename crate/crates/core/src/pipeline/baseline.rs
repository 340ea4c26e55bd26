//! Latent-free recurrent baselines.
//!
//! Both baselines run a gated cell over observations only,
//! `h_t = f(o_t, h_{t-1})` from a zero state, and predict `a_t` from `h_t`.
//! The decoder baseline also predicts `o_{t+1}` from `(a_t, h_t)`.

use rand::Rng;

use crate::diffcore::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::objective::LossBreakdown;
use crate::seqmodel::cell::{self, LstmVars, MlpVars, StateVars};
use crate::seqmodel::{check_obs_floor, gaussian_head, gaussian_head_floor, ActionDist, ActionKind, GaussVars, SeqModel};
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_kind: ActionKind,
    pub hidden_dim: usize,
    pub decoder_hidden_dims: Vec<usize>,
    /// Adds the next-observation head.
    pub predict_obs: bool,
    /// Lower clamp on the observation head's log-std.
    pub obs_log_std_min: f64,
}

impl RecurrentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.action_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(format!("zero-sized recurrent network {self:?}")));
        }
        check_obs_floor(self.obs_log_std_min)
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let dims: Vec<String> = self.decoder_hidden_dims.iter().map(|d| d.to_string()).collect();
        vec![
            ("obs_dim".into(), self.obs_dim.to_string()),
            ("action_dim".into(), self.action_dim.to_string()),
            ("action_kind".into(), self.action_kind.as_str().into()),
            ("hidden_dim".into(), self.hidden_dim.to_string()),
            ("decoder_hidden_dims".into(), dims.join(",")),
            ("predict_obs".into(), self.predict_obs.to_string()),
            ("obs_log_std_min".into(), self.obs_log_std_min.to_string()),
        ]
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| -> Result<&str> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::format("checkpoint header", format!("missing `{key}`")))
        };
        let num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::format("checkpoint header", format!("bad `{key}`")))
        };
        let dims = get("decoder_hidden_dims")?;
        let decoder_hidden_dims = if dims.is_empty() {
            Vec::new()
        } else {
            dims.split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format("checkpoint header", "bad `decoder_hidden_dims`"))?
        };
        let cfg = Self {
            obs_dim: num("obs_dim")?,
            action_dim: num("action_dim")?,
            action_kind: ActionKind::parse(get("action_kind")?)?,
            hidden_dim: num("hidden_dim")?,
            decoder_hidden_dims,
            predict_obs: get("predict_obs")? == "true",
            obs_log_std_min: get("obs_log_std_min")?
                .parse()
                .map_err(|_| Error::format("checkpoint header", "bad `obs_log_std_min`"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentNet {
    pub config: RecurrentConfig,
    pub params: ParamStore,
}

/// A recurrent baseline bound into one graph.
pub struct BoundRecurrent {
    pub config: RecurrentConfig,
    fwd: LstmVars,
    dec_act: MlpVars,
    dec_obs: Option<MlpVars>,
}

/// Summed loss terms of one trajectory, as graph nodes.
pub struct RecurrentLoss {
    pub total: Var,
    pub act_ll: Var,
    pub obs_ll: Option<Var>,
}

fn act_out(cfg: &RecurrentConfig) -> usize {
    match cfg.action_kind {
        ActionKind::Categorical => cfg.action_dim,
        ActionKind::Continuous => 2 * cfg.action_dim,
    }
}

impl RecurrentNet {
    pub fn new<R: Rng>(config: RecurrentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut p = ParamStore::new();
        cell::init_lstm(&mut p, "fwd", c.obs_dim, c.hidden_dim, rng)?;
        cell::init_mlp(&mut p, "dec_act", c.hidden_dim, &c.decoder_hidden_dims, act_out(c), rng)?;
        if c.predict_obs {
            cell::init_mlp(
                &mut p,
                "dec_obs",
                c.action_dim + c.hidden_dim,
                &c.decoder_hidden_dims,
                2 * c.obs_dim,
                rng,
            )?;
        }
        Ok(Self { config, params: p })
    }

    pub fn from_parts(config: RecurrentConfig, params: ParamStore) -> Result<Self> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let reference = Self::new(config.clone(), &mut rng)?;
        for (name, p) in reference.params.iter() {
            match params.value(name) {
                Some(v) if v.shape() == p.value.shape() => {}
                _ => {
                    return Err(Error::format(
                        "checkpoint",
                        format!("parameter `{name}` missing or misshapen"),
                    ))
                }
            }
        }
        Ok(Self { config, params })
    }

    /// The latent-free part of a full model: the `z` input rows of the
    /// forward cell and of both decoders' first layers are dropped.
    pub fn from_full_model(model: &SeqModel, predict_obs: bool) -> Result<Self> {
        let m = &model.config;
        let config = RecurrentConfig {
            obs_dim: m.obs_dim,
            action_dim: m.action_dim,
            action_kind: m.action_kind,
            hidden_dim: m.hidden_dim,
            decoder_hidden_dims: m.decoder_hidden_dims.clone(),
            predict_obs,
            obs_log_std_min: m.obs_log_std_min,
        };
        let mut params = ParamStore::new();
        let src = &model.params;
        let fwd_w = src.value("fwd.w").expect("fwd.w");
        let mut rows: Vec<usize> = (0..m.obs_dim).collect();
        rows.extend(m.obs_dim + m.latent_dim..m.obs_dim + m.latent_dim + m.hidden_dim);
        params.insert("fwd.w", take_rows(fwd_w, &rows))?;
        params.insert("fwd.b", src.value("fwd.b").expect("fwd.b").clone())?;
        let first = if m.decoder_hidden_dims.is_empty() { "out" } else { "l0" };
        let heads: &[(&str, usize)] = if predict_obs {
            &[("dec_act", m.hidden_dim), ("dec_obs", m.action_dim + m.hidden_dim)]
        } else {
            &[("dec_act", m.hidden_dim)]
        };
        for (head, keep) in heads {
            let prefix = format!("{head}.");
            for (name, p) in src.iter().filter(|(n, _)| n.starts_with(&prefix)) {
                let value = if *name == format!("{head}.{first}.w") {
                    take_rows(&p.value, &(0..*keep).collect::<Vec<_>>())
                } else {
                    p.value.clone()
                };
                params.insert(name, value)?;
            }
        }
        Ok(Self { config, params })
    }

    pub fn bind(&self, g: &mut Graph) -> Result<BoundRecurrent> {
        bind_recurrent(&self.config, &self.params, g)
    }

    /// `-sum_t log p(o_{t+1} | a_t, h_t)`; zero for the policy baseline.
    pub fn observation_nll(&self, traj: &Trajectory) -> Result<f64> {
        let mut g = Graph::inference();
        let b = self.bind(&mut g)?;
        let loss = b.loss_graph(&mut g, traj)?;
        Ok(loss.obs_ll.map_or(0.0, |v| -g.scalar(v)))
    }

    /// Loss of one trajectory with its breakdown, values only.
    pub fn loss(&self, traj: &Trajectory) -> Result<LossBreakdown> {
        let mut g = Graph::inference();
        let b = self.bind(&mut g)?;
        let loss = b.loss_graph(&mut g, traj)?;
        Ok(loss.breakdown(&g))
    }
}

fn take_rows(t: &Tensor, rows: &[usize]) -> Tensor {
    let cols = t.shape()[1];
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        data.extend_from_slice(&t.data()[r * cols..(r + 1) * cols]);
    }
    Tensor::matrix(rows.len(), cols, data).expect("row slice keeps the shape consistent")
}

pub fn bind_recurrent(config: &RecurrentConfig, p: &ParamStore, g: &mut Graph) -> Result<BoundRecurrent> {
    Ok(BoundRecurrent {
        config: config.clone(),
        fwd: cell::bind_lstm(g, p, "fwd")?,
        dec_act: cell::bind_mlp(g, p, "dec_act")?,
        dec_obs: if config.predict_obs {
            Some(cell::bind_mlp(g, p, "dec_obs")?)
        } else {
            None
        },
    })
}

impl RecurrentLoss {
    pub fn breakdown(&self, g: &Graph) -> LossBreakdown {
        let act = g.scalar(self.act_ll);
        let obs = self.obs_ll.map_or(0.0, |v| g.scalar(v));
        LossBreakdown::combine(obs, act, 0.0, 0.0, 0.0, 0.0)
    }
}

impl BoundRecurrent {
    pub fn zero_state(&self, g: &mut Graph) -> StateVars {
        cell::zero_state(g, self.config.hidden_dim)
    }

    pub fn step(&self, g: &mut Graph, o: Var, prev: &StateVars) -> Result<StateVars> {
        let n = g.value(o).len();
        if n != self.config.obs_dim {
            return Err(Error::dim("recurrent step", &[self.config.obs_dim], &[n]));
        }
        cell::lstm_step(g, &self.fwd, &[o], prev)
    }

    pub fn decode_action(&self, g: &mut Graph, state: &StateVars) -> Result<ActionDist> {
        let out = cell::mlp_forward(g, &self.dec_act, state.h)?;
        Ok(match self.config.action_kind {
            ActionKind::Categorical => ActionDist::Categorical {
                log_probs: g.log_softmax(out)?,
            },
            ActionKind::Continuous => ActionDist::Gaussian(gaussian_head(g, out, self.config.action_dim)?),
        })
    }

    pub fn decode_observation(&self, g: &mut Graph, a_embed: Var, state: &StateVars) -> Result<GaussVars> {
        let head = self
            .dec_obs
            .as_ref()
            .ok_or_else(|| Error::Contract("policy baseline has no observation head".into()))?;
        let x = g.concat(&[a_embed, state.h])?;
        let out = cell::mlp_forward(g, head, x)?;
        gaussian_head_floor(g, out, self.config.obs_dim, self.config.obs_log_std_min)
    }

    /// Maximum-likelihood loss of one trajectory: actions, plus next
    /// observations for the decoder baseline.
    pub fn loss_graph(&self, g: &mut Graph, traj: &Trajectory) -> Result<RecurrentLoss> {
        traj.validate()?;
        if traj.is_empty() {
            return Err(Error::Contract("baseline loss needs T >= 1".into()));
        }
        let mut state = self.zero_state(g);
        let mut act_terms = Vec::with_capacity(traj.len());
        let mut obs_terms = Vec::with_capacity(traj.len());
        for t in 0..traj.len() {
            let o = g.constant_vec(&traj.observations[t]);
            state = self.step(g, o, &state)?;
            let action = &traj.actions[t];
            let dist = self.decode_action(g, &state)?;
            act_terms.push(dist.log_likelihood(g, action)?);
            if self.dec_obs.is_some() {
                let a = g.constant_vec(&action.embed(self.config.action_dim));
                let d = self.decode_observation(g, a, &state)?;
                let next = g.constant_vec(&traj.observations[t + 1]);
                obs_terms.push(g.gaussian_logpdf(next, d.mean, d.log_std)?);
            }
        }
        let act_ll = g.add_all(&act_terms)?;
        let (obs_ll, gain) = if obs_terms.is_empty() {
            (None, act_ll)
        } else {
            let o = g.add_all(&obs_terms)?;
            (Some(o), g.add(act_ll, o)?)
        };
        Ok(RecurrentLoss {
            total: g.neg(gain),
            act_ll,
            obs_ll,
        })
    }
}
