//! Stochastic recurrent sequence model.
//!
//! The generative side runs a gated recurrent cell `h_t = f(o_t, h_{t-1}, z_t)`
//! and factorizes each step into a latent prior `p(z_t | h_{t-1})`, an action
//! decoder `p(a_{t-1} | h_{t-1}, z_t)` and an observation decoder
//! `p(o_t | a_{t-1}, h_{t-1}, z_t)`. The inference side runs a second cell
//! right to left over the observations, `b_t = g(o_t, b_{t+1})`, and the
//! approximate posterior `q(z_t | h_{t-1}, b_t)` reuses the generative
//! state `h_{t-1}`. An auxiliary decoder `p(b_t | z_t)` asks the latent to
//! carry the backward summary.
//!
//! Parameter names are prefixed by network: `fwd`, `bwd`, `prior`, `post`,
//! `dec_obs`, `dec_act`, `aux`.

pub mod cell;
mod checkpoint;
mod generate;
mod teacher;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub use cell::{LstmVars, MlpVars, StateVars};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use generate::{DecodeMode, GenerateOptions, Generated};
pub use teacher::{LatentMode, StepRecord, TeacherForced};


use crate::diffcore::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::trajectory::Action;

pub const LOG_STD_MIN: f64 = -8.0;
pub const LOG_STD_MAX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionKind {
    Categorical,
    Continuous,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Categorical => "categorical",
            ActionKind::Continuous => "continuous",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "categorical" => Ok(ActionKind::Categorical),
            "continuous" => Ok(ActionKind::Continuous),
            other => Err(Error::Config(format!("unknown action kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_kind: ActionKind,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub backward_hidden_dim: usize,
    pub decoder_hidden_dims: Vec<usize>,
    /// Lower clamp on the observation decoder's log-std, within
    /// [`LOG_STD_MIN`, `LOG_STD_MAX`). Raising it keeps near-deterministic
    /// binary observations from dominating the shared state.
    pub obs_log_std_min: f64,
}

/// Checks an observation log-std floor against the global clamp.
pub fn check_obs_floor(floor: f64) -> Result<()> {
    if !(LOG_STD_MIN..LOG_STD_MAX).contains(&floor) {
        return Err(Error::Config(format!(
            "obs_log_std_min {floor} outside [{LOG_STD_MIN}, {LOG_STD_MAX})"
        )));
    }
    Ok(())
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.obs_dim,
            self.action_dim,
            self.latent_dim,
            self.hidden_dim,
            self.backward_hidden_dim,
        ];
        if dims.iter().chain(&self.decoder_hidden_dims).any(|d| *d == 0) {
            return Err(Error::Config(format!("all model dims must be >= 1: {self:?}")));
        }
        check_obs_floor(self.obs_log_std_min)
    }

    /// `key=value` pairs in a fixed order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let hidden: Vec<String> = self.decoder_hidden_dims.iter().map(|d| d.to_string()).collect();
        vec![
            ("obs_dim".into(), self.obs_dim.to_string()),
            ("action_dim".into(), self.action_dim.to_string()),
            ("action_kind".into(), self.action_kind.as_str().into()),
            ("latent_dim".into(), self.latent_dim.to_string()),
            ("hidden_dim".into(), self.hidden_dim.to_string()),
            ("backward_hidden_dim".into(), self.backward_hidden_dim.to_string()),
            ("decoder_hidden_dims".into(), hidden.join(",")),
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
        let hidden = get("decoder_hidden_dims")?;
        let decoder_hidden_dims = if hidden.is_empty() {
            Vec::new()
        } else {
            hidden
                .split(',')
                .map(|s| s.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format("checkpoint header", "bad `decoder_hidden_dims`"))?
        };
        let cfg = ModelConfig {
            obs_dim: num("obs_dim")?,
            action_dim: num("action_dim")?,
            action_kind: ActionKind::parse(get("action_kind")?)?,
            latent_dim: num("latent_dim")?,
            hidden_dim: num("hidden_dim")?,
            backward_hidden_dim: num("backward_hidden_dim")?,
            decoder_hidden_dims,
            obs_log_std_min: get("obs_log_std_min")?
                .parse()
                .map_err(|_| Error::format("checkpoint header", "bad `obs_log_std_min`"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Recurrent state as plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl ForwardState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }

    pub fn bind(&self, g: &mut Graph) -> StateVars {
        StateVars {
            h: g.constant_vec(&self.h),
            c: g.constant_vec(&self.c),
        }
    }

    pub fn read(g: &Graph, s: &StateVars) -> Self {
        Self {
            h: g.data(s.h).to_vec(),
            c: g.data(s.c).to_vec(),
        }
    }
}

/// Backward recurrent state `(b_t, c_b)`.
pub type BackwardState = ForwardState;

/// Diagonal Gaussian as plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl DiagGaussian {
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            log_std: vec![0.0; dim],
        }
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        crate::diffcore::gaussian_logpdf(x, &self.mean, &self.log_std)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentSample {
        let epsilon: Vec<f64> = (0..self.mean.len()).map(|_| rng.sample(StandardNormal)).collect();
        LatentSample {
            z: reparameterize_values(self, &epsilon),
            epsilon,
            source: LatentSource::Prior,
        }
    }
}

/// Diagonal Gaussian whose parameters are graph nodes.
#[derive(Clone, Copy, Debug)]
pub struct GaussVars {
    pub mean: Var,
    pub log_std: Var,
}

impl GaussVars {
    pub fn read(&self, g: &Graph) -> DiagGaussian {
        DiagGaussian {
            mean: g.data(self.mean).to_vec(),
            log_std: g.data(self.log_std).to_vec(),
        }
    }

    pub fn bind(g: &mut Graph, d: &DiagGaussian) -> Self {
        Self {
            mean: g.constant_vec(&d.mean),
            log_std: g.constant_vec(&d.log_std),
        }
    }
}

/// Output of the action decoder.
#[derive(Clone, Copy, Debug)]
pub enum ActionDist {
    /// Normalized log-probabilities.
    Categorical { log_probs: Var },
    Gaussian(GaussVars),
}

impl ActionDist {
    pub fn log_likelihood(&self, g: &mut Graph, action: &Action) -> Result<Var> {
        match (self, action) {
            (ActionDist::Categorical { log_probs }, Action::Discrete(i)) => g.pick(*log_probs, *i),
            (ActionDist::Gaussian(d), Action::Continuous(a)) => {
                let a = g.constant_vec(a);
                g.gaussian_logpdf(a, d.mean, d.log_std)
            }
            _ => Err(Error::Contract("action kind does not match decoder".into())),
        }
    }

    /// Most likely action; ties go to the lowest index.
    pub fn mode(&self, g: &Graph) -> Action {
        match self {
            ActionDist::Categorical { log_probs } => Action::Discrete(argmax(g.data(*log_probs))),
            ActionDist::Gaussian(d) => Action::Continuous(g.data(d.mean).to_vec()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, g: &Graph, rng: &mut R) -> Action {
        match self {
            ActionDist::Categorical { log_probs } => {
                Action::Discrete(sample_categorical(g.data(*log_probs), rng))
            }
            ActionDist::Gaussian(d) => {
                let d = d.read(g);
                Action::Continuous(d.sample(rng).z)
            }
        }
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentSource {
    Prior,
    Posterior,
}

/// A latent draw together with the noise that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    pub z: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub source: LatentSource,
}

/// `mean + exp(log_std) * epsilon`.
pub fn reparameterize_values(dist: &DiagGaussian, epsilon: &[f64]) -> Vec<f64> {
    dist.mean
        .iter()
        .zip(&dist.log_std)
        .zip(epsilon)
        .map(|((m, l), e)| m + l.exp() * e)
        .collect()
}

/// Differentiable reparameterized sample.
pub fn reparameterize(g: &mut Graph, dist: &GaussVars, epsilon: &[f64]) -> Result<Var> {
    let n = g.value(dist.mean).len();
    if epsilon.len() != n {
        return Err(Error::dim("reparameterize", &[n], &[epsilon.len()]));
    }
    let std = g.exp(dist.log_std);
    let eps = g.constant_vec(epsilon);
    let noise = g.mul(std, eps)?;
    g.add(dist.mean, noise)
}

/// Model parameters plus their configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqModel {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl SeqModel {
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let hd = &c.decoder_hidden_dims;
        let mut p = ParamStore::new();
        cell::init_lstm(&mut p, "fwd", c.obs_dim + c.latent_dim, c.hidden_dim, rng)?;
        cell::init_lstm(&mut p, "bwd", c.obs_dim, c.backward_hidden_dim, rng)?;
        cell::init_mlp(&mut p, "prior", c.hidden_dim, hd, 2 * c.latent_dim, rng)?;
        cell::init_mlp(
            &mut p,
            "post",
            c.hidden_dim + c.backward_hidden_dim,
            hd,
            2 * c.latent_dim,
            rng,
        )?;
        cell::init_mlp(
            &mut p,
            "dec_obs",
            c.action_dim + c.hidden_dim + c.latent_dim,
            hd,
            2 * c.obs_dim,
            rng,
        )?;
        let act_out = match c.action_kind {
            ActionKind::Categorical => c.action_dim,
            ActionKind::Continuous => 2 * c.action_dim,
        };
        cell::init_mlp(&mut p, "dec_act", c.hidden_dim + c.latent_dim, hd, act_out, rng)?;
        cell::init_mlp(&mut p, "aux", c.latent_dim, hd, c.backward_hidden_dim, rng)?;
        Ok(Self { config, params: p })
    }

    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let shape_ref = SeqModel::new(config.clone(), &mut rng)?;
        for (name, p) in shape_ref.params.iter() {
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

    /// Binds every parameter into `g`.
    pub fn bind<'m>(&'m self, g: &mut Graph) -> Result<Bound<'m>> {
        bind_params(&self.config, &self.params, g)
    }

    /// Names of the inference (backward) network parameters.
    pub fn backward_param_names(&self) -> Vec<String> {
        self.params
            .names()
            .filter(|n| n.starts_with("bwd."))
            .map(str::to_string)
            .collect()
    }

    /// Zero-initializes the named head (`prior`, `post`, `dec_obs`, ...).
    pub fn zero_head(&mut self, prefix: &str) {
        cell::zero_params(&mut self.params, prefix);
    }

    /// Makes the posterior ignore `b` and equal the prior exactly: the
    /// posterior head copies the prior head and its `b` input rows are
    /// zeroed. Requires the two heads to share hidden widths.
    pub fn tie_posterior_to_prior(&mut self) -> Result<()> {
        let names: Vec<String> = self
            .params
            .names()
            .filter(|n| n.starts_with("prior."))
            .map(str::to_string)
            .collect();
        let hidden = self.config.hidden_dim;
        for name in names {
            let src = self.params.value(&name).expect("listed").clone();
            let dst_name = name.replacen("prior.", "post.", 1);
            let dst = self
                .params
                .value_mut(&dst_name)
                .ok_or_else(|| Error::Contract(format!("missing `{dst_name}`")))?;
            if dst.shape() == src.shape() {
                *dst = src;
            } else {
                // first layer: [hidden + backward, width] <- [hidden, width]
                let width = src.shape()[1];
                let data = dst.data_mut();
                data.fill(0.0);
                data[..hidden * width].copy_from_slice(src.data());
            }
        }
        Ok(())
    }

    /// State entering step 1: the zero state advanced by `o_0` with a zero
    /// latent.
    pub fn initial_state(&self, o0: &[f64]) -> Result<ForwardState> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let s = m.initial_state(&mut g, o0)?;
        Ok(ForwardState::read(&g, &s))
    }

    pub fn forward_transition(
        &self,
        o: &[f64],
        prev: &ForwardState,
        z: &LatentSample,
    ) -> Result<ForwardState> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let o = g.constant_vec(o);
        let z = g.constant_vec(&z.z);
        let prev = prev.bind(&mut g);
        let s = m.forward_transition(&mut g, o, &prev, z)?;
        Ok(ForwardState::read(&g, &s))
    }

    pub fn backward_encode(&self, observations: &[Vec<f64>]) -> Result<Vec<BackwardState>> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let obs: Vec<Var> = observations.iter().map(|o| g.constant_vec(o)).collect();
        let states = m.backward_encode(&mut g, &obs)?;
        Ok(states.iter().map(|s| ForwardState::read(&g, s)).collect())
    }

    pub fn prior(&self, h_prev: &ForwardState) -> Result<DiagGaussian> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let h = h_prev.bind(&mut g);
        Ok(m.prior(&mut g, &h)?.read(&g))
    }

    pub fn posterior(&self, h_prev: &ForwardState, b: &BackwardState) -> Result<DiagGaussian> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let h = h_prev.bind(&mut g);
        let b = g.constant_vec(&b.h);
        Ok(m.posterior(&mut g, &h, b)?.read(&g))
    }

    pub fn decode_observation(
        &self,
        a_prev: &Action,
        h_prev: &ForwardState,
        z: &LatentSample,
    ) -> Result<DiagGaussian> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let h = h_prev.bind(&mut g);
        let z = g.constant_vec(&z.z);
        let a = g.constant_vec(&a_prev.embed(self.config.action_dim));
        Ok(m.decode_observation(&mut g, a, &h, z)?.read(&g))
    }

    /// Action probabilities (categorical) or the Gaussian head (continuous).
    pub fn decode_action(&self, h_prev: &ForwardState, z: &LatentSample) -> Result<ActionDistValue> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let h = h_prev.bind(&mut g);
        let z = g.constant_vec(&z.z);
        Ok(match m.decode_action(&mut g, &h, z)? {
            ActionDist::Categorical { log_probs } => ActionDistValue::Categorical {
                log_probs: g.data(log_probs).to_vec(),
            },
            ActionDist::Gaussian(d) => ActionDistValue::Gaussian(d.read(&g)),
        })
    }

    pub fn aux_decode(&self, z: &LatentSample) -> Result<DiagGaussian> {
        let mut g = Graph::inference();
        let m = self.bind(&mut g)?;
        let z = g.constant_vec(&z.z);
        Ok(m.aux_decode(&mut g, z)?.read(&g))
    }
}

/// Action decoder output as plain values.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionDistValue {
    Categorical { log_probs: Vec<f64> },
    Gaussian(DiagGaussian),
}

impl ActionDistValue {
    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (ActionDistValue::Categorical { log_probs }, Action::Discrete(i)) => log_probs
                .get(*i)
                .copied()
                .ok_or_else(|| Error::dim("action", &[log_probs.len()], &[*i])),
            (ActionDistValue::Gaussian(d), Action::Continuous(a)) => Ok(d.log_prob(a)),
            _ => Err(Error::Contract("action kind does not match decoder".into())),
        }
    }
}

/// Binds `params` laid out for `config` into `g`.
pub fn bind_params<'m>(config: &'m ModelConfig, p: &ParamStore, g: &mut Graph) -> Result<Bound<'m>> {
    Ok(Bound {
        config,
        fwd: cell::bind_lstm(g, p, "fwd")?,
        bwd: cell::bind_lstm(g, p, "bwd")?,
        prior: cell::bind_mlp(g, p, "prior")?,
        post: cell::bind_mlp(g, p, "post")?,
        dec_obs: cell::bind_mlp(g, p, "dec_obs")?,
        dec_act: cell::bind_mlp(g, p, "dec_act")?,
        aux: cell::bind_mlp(g, p, "aux")?,
    })
}

/// A model whose parameters are bound into one graph.
pub struct Bound<'m> {
    pub config: &'m ModelConfig,
    fwd: LstmVars,
    bwd: LstmVars,
    prior: MlpVars,
    post: MlpVars,
    dec_obs: MlpVars,
    dec_act: MlpVars,
    aux: MlpVars,
}

/// Splits `out` into a mean and a clamped log-std of `dim` entries each.
pub fn gaussian_head(g: &mut Graph, out: Var, dim: usize) -> Result<GaussVars> {
    gaussian_head_floor(g, out, dim, LOG_STD_MIN)
}

/// [`gaussian_head`] with a raised lower clamp.
pub fn gaussian_head_floor(g: &mut Graph, out: Var, dim: usize, floor: f64) -> Result<GaussVars> {
    let mean = g.slice(out, 0, dim)?;
    let raw = g.slice(out, dim, dim)?;
    let log_std = g.clamp(raw, floor, LOG_STD_MAX);
    Ok(GaussVars { mean, log_std })
}

fn check_len(g: &Graph, v: Var, expected: usize, what: &'static str) -> Result<()> {
    let n = g.value(v).len();
    if n != expected {
        return Err(Error::dim(what, &[expected], &[n]));
    }
    Ok(())
}

impl Bound<'_> {
    pub fn initial_state(&self, g: &mut Graph, o0: &[f64]) -> Result<StateVars> {
        let zero = cell::zero_state(g, self.config.hidden_dim);
        let o = g.constant_vec(o0);
        let z = g.constant(Tensor::zeros(&[self.config.latent_dim]));
        self.forward_transition(g, o, &zero, z)
    }

    pub fn forward_transition(&self, g: &mut Graph, o: Var, prev: &StateVars, z: Var) -> Result<StateVars> {
        check_len(g, o, self.config.obs_dim, "forward_transition observation")?;
        check_len(g, z, self.config.latent_dim, "forward_transition latent")?;
        check_len(g, prev.h, self.config.hidden_dim, "forward_transition state")?;
        cell::lstm_step(g, &self.fwd, &[o, z], prev)
    }

    /// `b_1..b_T` for observations `o_1..o_T`, computed right to left from a
    /// zero `b_{T+1}`.
    pub fn backward_encode(&self, g: &mut Graph, observations: &[Var]) -> Result<Vec<StateVars>> {
        if observations.is_empty() {
            return Err(Error::Contract("backward_encode of an empty sequence".into()));
        }
        let mut next = cell::zero_state(g, self.config.backward_hidden_dim);
        let mut out = Vec::with_capacity(observations.len());
        for o in observations.iter().rev() {
            check_len(g, *o, self.config.obs_dim, "backward_encode observation")?;
            next = cell::lstm_step(g, &self.bwd, &[*o], &next)?;
            out.push(next);
        }
        out.reverse();
        Ok(out)
    }

    pub fn prior(&self, g: &mut Graph, h_prev: &StateVars) -> Result<GaussVars> {
        let out = cell::mlp_forward(g, &self.prior, h_prev.h)?;
        gaussian_head(g, out, self.config.latent_dim)
    }

    pub fn posterior(&self, g: &mut Graph, h_prev: &StateVars, b: Var) -> Result<GaussVars> {
        let x = g.concat(&[h_prev.h, b])?;
        let out = cell::mlp_forward(g, &self.post, x)?;
        gaussian_head(g, out, self.config.latent_dim)
    }

    /// `a_prev` is the embedded previous action.
    pub fn decode_observation(&self, g: &mut Graph, a_prev: Var, h_prev: &StateVars, z: Var) -> Result<GaussVars> {
        check_len(g, a_prev, self.config.action_dim, "decode_observation action")?;
        let x = g.concat(&[a_prev, h_prev.h, z])?;
        let out = cell::mlp_forward(g, &self.dec_obs, x)?;
        gaussian_head_floor(g, out, self.config.obs_dim, self.config.obs_log_std_min)
    }

    pub fn decode_action(&self, g: &mut Graph, h_prev: &StateVars, z: Var) -> Result<ActionDist> {
        let x = g.concat(&[h_prev.h, z])?;
        let out = cell::mlp_forward(g, &self.dec_act, x)?;
        Ok(match self.config.action_kind {
            ActionKind::Categorical => ActionDist::Categorical {
                log_probs: g.log_softmax(out)?,
            },
            ActionKind::Continuous => ActionDist::Gaussian(gaussian_head(g, out, self.config.action_dim)?),
        })
    }

    /// Unit-variance Gaussian over backward states given `z`.
    pub fn aux_decode(&self, g: &mut Graph, z: Var) -> Result<GaussVars> {
        let mean = cell::mlp_forward(g, &self.aux, z)?;
        let log_std = g.constant(Tensor::zeros(&[self.config.backward_hidden_dim]));
        Ok(GaussVars { mean, log_std })
    }
}

#[cfg(test)]
mod tests;
