use std::collections::BTreeMap;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::Result;

/// Smallest denominator used when forming relative errors, so that
/// gradients that are zero up to finite-difference noise do not blow up the
/// ratio.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest relative error seen in each parameter tensor.
    pub per_param: BTreeMap<String, f64>,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub tolerance: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Gradients of the loss built by `f`, one tensor per parameter name.
pub fn analytic_gradients<F>(f: &F, params: &ParamStore) -> Result<BTreeMap<String, Tensor>>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    g.backward(loss)?;
    let mut scratch = params.clone();
    scratch.zero_grads();
    g.accumulate_param_grads(&mut scratch);
    Ok(scratch
        .iter()
        .map(|(n, p)| (n.to_string(), p.grad.clone()))
        .collect())
}

/// Compares `analytic` against central differences of `f` with step `eps`.
pub fn compare_gradients<F>(
    f: &F,
    params: &ParamStore,
    analytic: &BTreeMap<String, Tensor>,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let eval = |p: &ParamStore| -> Result<f64> {
        let mut g = Graph::inference();
        let loss = f(&mut g, p)?;
        Ok(g.scalar(loss))
    };
    let mut probe = params.clone();
    let mut per_param = BTreeMap::new();
    let mut max_rel_error = 0.0_f64;
    let mut worst_param = String::new();
    let mut checked = 0;
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let n = params.value(&name).map_or(0, Tensor::len);
        let zeros = Tensor::zeros(&[n]);
        let grad = analytic.get(&name).unwrap_or(&zeros);
        let mut worst = 0.0_f64;
        for k in 0..n {
            let orig = params.value(&name).expect("listed").data()[k];
            probe.value_mut(&name).expect("listed").data_mut()[k] = orig + eps;
            let up = eval(&probe)?;
            probe.value_mut(&name).expect("listed").data_mut()[k] = orig - eps;
            let down = eval(&probe)?;
            probe.value_mut(&name).expect("listed").data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(grad.data()[k], numeric));
            checked += 1;
        }
        if worst > max_rel_error || worst_param.is_empty() {
            max_rel_error = max_rel_error.max(worst);
            worst_param = name.clone();
        }
        per_param.insert(name, worst);
    }
    Ok(GradCheckReport {
        per_param,
        max_rel_error,
        worst_param,
        tolerance: tol,
        checked,
    })
}

/// Central-difference gradient check of every parameter used by `f`.
pub fn grad_check<F>(f: F, params: &ParamStore, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let analytic = analytic_gradients(&f, params)?;
    compare_gradients(&f, params, &analytic, eps, tol)
}
