//! Regularized ELBO and everything needed to optimize it.
//!
//! Per step the objective adds the observation and action log-likelihoods
//! under a single reparameterized posterior sample, subtracts the annealed
//! analytic KL between posterior and prior, and adds `beta` times the
//! auxiliary log-likelihood `log p(b_t | z_t)`. The auxiliary target `b_t`
//! is detached, so the backward network is trained only through the
//! posterior.
//!
//! [`LossBreakdown::total`] is the negated objective, i.e. the quantity that
//! is minimized.

mod nll;
mod train;

use rand::Rng;

pub use nll::{sequence_nll, NllEstimate};
pub use train::{metrics_header, Trainer};

use crate::diffcore::{Graph, Var};
use crate::error::{Error, Result};
use crate::seqmodel::{Bound, DiagGaussian, ForwardState, GaussVars, LatentMode, SeqModel, StepRecord};
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveConfig {
    /// Weight of the auxiliary log-likelihood.
    pub beta: f64,
    pub kl_start: f64,
    pub kl_increment: f64,
    pub kl_cap: f64,
    pub learning_rate: f64,
    /// Transitions per truncated-backprop chunk; the forward state is carried
    /// across chunk boundaries.
    pub chunk_len: usize,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            beta: 0.0005,
            kl_start: 0.2,
            kl_increment: 0.0005,
            kl_cap: 1.0,
            learning_rate: 1e-3,
            chunk_len: 250,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0
            && self.kl_start > 0.0
            && self.kl_start <= self.kl_cap
            && self.kl_increment >= 0.0
            && self.learning_rate > 0.0
            && self.chunk_len >= 1)
        {
            return Err(Error::Config(format!("invalid objective config {self:?}")));
        }
        Ok(())
    }
}

/// Annealed KL weight: `min(kl_start + kl_increment * iteration, kl_cap)`.
pub fn kl_schedule(iteration: u64, config: &ObjectiveConfig) -> f64 {
    (config.kl_start + config.kl_increment * iteration as f64).min(config.kl_cap)
}

/// Summed terms of one trajectory's objective.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub obs_recon: f64,
    pub act_recon: f64,
    pub kl_total: f64,
    pub aux_total: f64,
    pub total: f64,
    pub kl_weight_used: f64,
}

impl LossBreakdown {
    /// `-(obs + act + beta * aux - kl_weight * kl)`
    pub fn combine(obs: f64, act: f64, kl: f64, aux: f64, beta: f64, kl_weight: f64) -> Self {
        Self {
            obs_recon: obs,
            act_recon: act,
            kl_total: kl,
            aux_total: aux,
            total: -(obs + act + beta * aux - kl_weight * kl),
            kl_weight_used: kl_weight,
        }
    }

    pub(crate) fn add(&mut self, other: &LossBreakdown) {
        self.obs_recon += other.obs_recon;
        self.act_recon += other.act_recon;
        self.kl_total += other.kl_total;
        self.aux_total += other.aux_total;
        self.total += other.total;
        self.kl_weight_used = other.kl_weight_used;
    }

    pub(crate) fn scaled(&self, f: f64) -> Self {
        Self {
            obs_recon: self.obs_recon * f,
            act_recon: self.act_recon * f,
            kl_total: self.kl_total * f,
            aux_total: self.aux_total * f,
            total: self.total * f,
            kl_weight_used: self.kl_weight_used,
        }
    }
}

/// Closed-form `KL(q || p)` between diagonal Gaussians, as a graph node.
pub fn kl_diag_gaussian(g: &mut Graph, q: &GaussVars, p: &GaussVars) -> Result<Var> {
    let n = g.value(q.mean).len();
    for v in [q.log_std, p.mean, p.log_std] {
        if g.value(v).len() != n {
            return Err(Error::dim("kl_diag_gaussian", &[n], g.value(v).shape()));
        }
    }
    // exp(2(lq - lp)) instead of var_q / var_p keeps KL(q || q) exactly 0
    let log_ratio = g.sub(p.log_std, q.log_std)?;
    let var_ratio_log = g.scale(log_ratio, -2.0);
    let var_ratio = g.exp(var_ratio_log);
    let diff = g.sub(q.mean, p.mean)?;
    let diff2 = g.square(diff);
    let neg_two_lp = g.scale(p.log_std, -2.0);
    let inv_var_p = g.exp(neg_two_lp);
    let mahal = g.mul(diff2, inv_var_p)?;
    let ratio = g.add(var_ratio, mahal)?;
    let half = g.scale(ratio, 0.5);
    let per_dim = g.add(log_ratio, half)?;
    let total = g.sum(per_dim);
    Ok(g.shift(total, -0.5 * n as f64))
}

/// Closed-form KL on plain values.
pub fn kl_diag_gaussian_values(q: &DiagGaussian, p: &DiagGaussian) -> Result<f64> {
    if q.mean.len() != p.mean.len() {
        return Err(Error::dim("kl_diag_gaussian", &[q.mean.len()], &[p.mean.len()]));
    }
    Ok((0..q.mean.len())
        .map(|k| {
            let (lq, lp) = (q.log_std[k], p.log_std[k]);
            let d = q.mean[k] - p.mean[k];
            lp - lq + 0.5 * ((2.0 * (lq - lp)).exp() + d * d * (-2.0 * lp).exp()) - 0.5
        })
        .sum())
}

/// Graph nodes of the ELBO terms.
#[derive(Clone, Copy, Debug)]
pub struct ElboVars {
    pub obs_recon: Var,
    pub act_recon: Var,
    pub kl_total: Var,
}

/// Sums reconstruction and KL terms over the records.
pub fn elbo_terms(g: &mut Graph, records: &[StepRecord]) -> Result<ElboVars> {
    if records.is_empty() {
        return Err(Error::Contract("elbo of an empty record".into()));
    }
    let obs: Vec<Var> = records.iter().map(|r| r.obs_ll).collect();
    let act: Vec<Var> = records.iter().map(|r| r.act_ll).collect();
    let mut kls = Vec::with_capacity(records.len());
    for r in records {
        kls.push(kl_diag_gaussian(g, &r.posterior, &r.prior)?);
    }
    Ok(ElboVars {
        obs_recon: g.add_all(&obs)?,
        act_recon: g.add_all(&act)?,
        kl_total: g.add_all(&kls)?,
    })
}

/// ELBO breakdown without the auxiliary term.
pub fn elbo(g: &mut Graph, records: &[StepRecord], kl_weight: f64) -> Result<LossBreakdown> {
    let e = elbo_terms(g, records)?;
    Ok(LossBreakdown::combine(
        g.scalar(e.obs_recon),
        g.scalar(e.act_recon),
        g.scalar(e.kl_total),
        0.0,
        0.0,
        kl_weight,
    ))
}

/// `sum_t log p(stopgrad(b_t) | z_t)`. Pass [`StepRecord::z_aux`] as the
/// latents to keep the backward network out of this term entirely.
pub fn aux_cost(g: &mut Graph, model: &Bound<'_>, latents: &[Var], backward_states: &[Var]) -> Result<Var> {
    if latents.len() != backward_states.len() {
        return Err(Error::dim("aux_cost", &[latents.len()], &[backward_states.len()]));
    }
    if latents.is_empty() {
        return Err(Error::Contract("aux_cost of an empty sequence".into()));
    }
    let mut terms = Vec::with_capacity(latents.len());
    for (z, b) in latents.iter().zip(backward_states) {
        let target = g.detach(*b);
        let d = model.aux_decode(g, *z)?;
        terms.push(g.gaussian_logpdf(target, d.mean, d.log_std)?);
    }
    g.add_all(&terms)
}

/// Per-step auxiliary negative log-likelihoods of a teacher-forced pass.
pub fn aux_costs_per_step(g: &mut Graph, model: &Bound<'_>, records: &[StepRecord]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let target = g.detach(r.b);
        let d = model.aux_decode(g, r.z_aux)?;
        let lp = g.gaussian_logpdf(target, d.mean, d.log_std)?;
        out.push(-g.scalar(lp));
    }
    Ok(out)
}

/// Graph form of the full objective for one (chunk of a) trajectory.
pub struct LossGraph {
    pub total: Var,
    pub breakdown: LossBreakdown,
    pub final_state: ForwardState,
}

pub fn total_loss_graph<R: Rng + ?Sized>(
    g: &mut Graph,
    model: &Bound<'_>,
    traj: &Trajectory,
    init: Option<&ForwardState>,
    config: &ObjectiveConfig,
    kl_weight: f64,
    latents: LatentMode<'_>,
    rng: &mut R,
) -> Result<LossGraph> {
    let tf = model.teacher_forced_pass(g, traj, init, latents, rng)?;
    let e = elbo_terms(g, &tf.steps)?;
    let zs: Vec<Var> = tf.steps.iter().map(|s| s.z_aux).collect();
    let bs: Vec<Var> = tf.steps.iter().map(|s| s.b).collect();
    let aux = aux_cost(g, model, &zs, &bs)?;
    let recon = g.add(e.obs_recon, e.act_recon)?;
    let weighted_aux = g.scale(aux, config.beta);
    let gain = g.add(recon, weighted_aux)?;
    let weighted_kl = g.scale(e.kl_total, kl_weight);
    let objective = g.sub(gain, weighted_kl)?;
    let total = g.neg(objective);
    let breakdown = LossBreakdown::combine(
        g.scalar(e.obs_recon),
        g.scalar(e.act_recon),
        g.scalar(e.kl_total),
        g.scalar(aux),
        config.beta,
        kl_weight,
    );
    Ok(LossGraph {
        total,
        breakdown,
        final_state: ForwardState::read(g, &tf.final_state),
    })
}

/// Objective of a whole trajectory at the given training iteration, with
/// chunking applied. Values only; see [`Trainer`] for gradients.
pub fn total_loss<R: Rng + ?Sized>(
    model: &SeqModel,
    traj: &Trajectory,
    config: &ObjectiveConfig,
    iteration: u64,
    rng: &mut R,
) -> Result<LossBreakdown> {
    let kl_weight = kl_schedule(iteration, config);
    let mut sum = LossBreakdown::default();
    let mut carried: Option<ForwardState> = None;
    for (start, end) in chunk_bounds(traj.len(), config.chunk_len) {
        let chunk = traj.segment(start, end);
        let mut g = Graph::inference();
        let bound = model.bind(&mut g)?;
        let out = total_loss_graph(
            &mut g,
            &bound,
            &chunk,
            carried.as_ref(),
            config,
            kl_weight,
            LatentMode::Posterior,
            rng,
        )?;
        sum.add(&out.breakdown);
        carried = Some(out.final_state);
    }
    sum.kl_weight_used = kl_weight;
    Ok(sum)
}

/// `[start, end)` transition ranges of at most `chunk_len` transitions.
pub fn chunk_bounds(len: usize, chunk_len: usize) -> Vec<(usize, usize)> {
    let chunk_len = chunk_len.max(1);
    (0..len)
        .step_by(chunk_len)
        .map(|s| (s, (s + chunk_len).min(len)))
        .collect()
}
