//! Building blocks shared by every recurrent network in the crate.

use rand::Rng;

use crate::diffcore::{Graph, ParamStore, Tensor, Var};
use crate::error::Result;

/// Gated recurrent cell parameters bound to a graph.
///
/// The weight has shape `[input + hidden, 4 * hidden]` over the
/// concatenation `[x; h_prev]`, gate columns ordered input, forget,
/// candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w: Var,
    pub b: Var,
    pub hidden: usize,
}

/// Hidden and memory vectors of a recurrent cell, as graph nodes.
#[derive(Clone, Copy, Debug)]
pub struct StateVars {
    pub h: Var,
    pub c: Var,
}

pub fn init_lstm<R: Rng>(
    store: &mut ParamStore,
    prefix: &str,
    input: usize,
    hidden: usize,
    rng: &mut R,
) -> Result<()> {
    let fan_in = input + hidden;
    store.insert_uniform(format!("{prefix}.w"), &[fan_in, 4 * hidden], fan_in, rng)?;
    let mut bias = vec![0.0; 4 * hidden];
    bias[hidden..2 * hidden].fill(1.0);
    store.insert(format!("{prefix}.b"), Tensor::vector(bias))
}

pub fn bind_lstm(g: &mut Graph, store: &ParamStore, prefix: &str) -> Result<LstmVars> {
    let w = g.param(store, &format!("{prefix}.w"))?;
    let b = g.param(store, &format!("{prefix}.b"))?;
    let hidden = g.value(b).len() / 4;
    Ok(LstmVars { w, b, hidden })
}

pub fn zero_state(g: &mut Graph, hidden: usize) -> StateVars {
    let h = g.constant(Tensor::zeros(&[hidden]));
    let c = g.constant(Tensor::zeros(&[hidden]));
    StateVars { h, c }
}

pub fn lstm_step(g: &mut Graph, cell: &LstmVars, inputs: &[Var], prev: &StateVars) -> Result<StateVars> {
    let mut parts = inputs.to_vec();
    parts.push(prev.h);
    let x = g.concat(&parts)?;
    let pre = g.affine(x, cell.w, Some(cell.b))?;
    let n = cell.hidden;
    let i = g.slice(pre, 0, n)?;
    let f = g.slice(pre, n, n)?;
    let cand = g.slice(pre, 2 * n, n)?;
    let o = g.slice(pre, 3 * n, n)?;
    let i = g.sigmoid(i);
    let f = g.sigmoid(f);
    let cand = g.tanh(cand);
    let o = g.sigmoid(o);
    let keep = g.mul(f, prev.c)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok(StateVars { h, c })
}

/// Feed-forward network with tanh hidden layers and a linear output.
#[derive(Clone, Debug)]
pub struct MlpVars {
    layers: Vec<(Var, Var)>,
}

pub fn init_mlp<R: Rng>(
    store: &mut ParamStore,
    prefix: &str,
    input: usize,
    hidden: &[usize],
    output: usize,
    rng: &mut R,
) -> Result<()> {
    let mut fan_in = input;
    for (k, width) in hidden.iter().enumerate() {
        store.insert_uniform(format!("{prefix}.l{k}.w"), &[fan_in, *width], fan_in, rng)?;
        store.insert_uniform(format!("{prefix}.l{k}.b"), &[*width], fan_in, rng)?;
        fan_in = *width;
    }
    store.insert_uniform(format!("{prefix}.out.w"), &[fan_in, output], fan_in, rng)?;
    store.insert_uniform(format!("{prefix}.out.b"), &[output], fan_in, rng)
}

pub fn bind_mlp(g: &mut Graph, store: &ParamStore, prefix: &str) -> Result<MlpVars> {
    let mut layers = Vec::new();
    let mut k = 0;
    while store.contains(&format!("{prefix}.l{k}.w")) {
        layers.push((
            g.param(store, &format!("{prefix}.l{k}.w"))?,
            g.param(store, &format!("{prefix}.l{k}.b"))?,
        ));
        k += 1;
    }
    layers.push((
        g.param(store, &format!("{prefix}.out.w"))?,
        g.param(store, &format!("{prefix}.out.b"))?,
    ));
    Ok(MlpVars { layers })
}

pub fn mlp_forward(g: &mut Graph, mlp: &MlpVars, x: Var) -> Result<Var> {
    let (last, hidden) = mlp.layers.split_last().expect("output layer");
    let mut x = x;
    for (w, b) in hidden {
        let a = g.affine(x, *w, Some(*b))?;
        x = g.tanh(a);
    }
    g.affine(x, last.0, Some(last.1))
}

/// Sets every parameter under `prefix.` to zero.
pub fn zero_params(store: &mut ParamStore, prefix: &str) {
    let dotted = format!("{prefix}.");
    for (name, p) in store.iter_mut() {
        if name.starts_with(&dotted) {
            p.value.data_mut().fill(0.0);
        }
    }
}
