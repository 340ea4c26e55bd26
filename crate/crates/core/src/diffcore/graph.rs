use std::collections::HashMap;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Square,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Min,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param,
    Affine { x: Var, w: Var, b: Option<Var> },
    Unary { kind: UnaryOp, x: Var },
    Binary { kind: BinaryOp, a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    Shift { x: Var },
    Sum { x: Var },
    Concat { parts: Vec<Var> },
    Slice { x: Var, start: usize },
    Pick { x: Var, index: usize },
    Clamp { x: Var, lo: f64, hi: f64 },
    Detach,
    LogSoftmax { x: Var },
    GaussianLogpdf { x: Var, mean: Var, log_std: Var },
}

/// One recorded value plus the operation that produced it.
#[derive(Clone, Debug)]
pub struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

impl Node {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    /// Nodes this one was computed from.
    pub fn parents(&self) -> Vec<Var> {
        match &self.op {
            Op::Leaf | Op::Param | Op::Detach => Vec::new(),
            Op::Affine { x, w, b } => {
                let mut p = vec![*x, *w];
                p.extend(b.iter().copied());
                p
            }
            Op::Unary { x, .. }
            | Op::Scale { x, .. }
            | Op::Shift { x }
            | Op::Sum { x }
            | Op::Slice { x, .. }
            | Op::Pick { x, .. }
            | Op::Clamp { x, .. }
            | Op::LogSoftmax { x } => vec![*x],
            Op::Binary { a, b, .. } => vec![*a, *b],
            Op::Concat { parts } => parts.clone(),
            Op::GaussianLogpdf { x, mean, log_std } => vec![*x, *mean, *log_std],
        }
    }
}

/// Define-by-run computation graph.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and the reverse sweep in [`Graph::backward`] needs no
/// sorting. A graph is meant to be built for one loss evaluation and then
/// dropped.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    params: HashMap<String, Var>,
    no_grad: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A graph that records values only. Every node reports
    /// `requires_grad == false` and `backward` is a no-op.
    pub fn inference() -> Self {
        Self {
            no_grad: true,
            ..Self::default()
        }
    }

    pub fn is_inference(&self) -> bool {
        self.no_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    /// Drops every node created after the first `len`. Parameters bound
    /// before that point stay valid; gradients are discarded.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.grads.clear();
        self.params.retain(|_, v| v.0 < len);
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.is_finite() || !matches!(op, Op::Leaf));
        self.nodes.push(Node {
            value,
            op,
            requires_grad: requires_grad && !self.no_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input; no gradient is tracked for it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_vec(&mut self, data: &[f64]) -> Var {
        self.constant(Tensor::vector(data.to_vec()))
    }

    /// Leaf whose gradient is tracked.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Binds a named parameter. Repeated calls with the same name return the
    /// same node so that shared weights accumulate their gradient.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        let value = store
            .value(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))?
            .clone();
        let v = self.push(value, Op::Param, true);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// `x · w + b` with `x` of shape `[n]` or `[rows, n]`, `w` of shape
    /// `[n, m]` and optional bias `[m]` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.value(x);
        let ws = self.value(w);
        let (rows, n) = xs
            .as_rows_cols()
            .ok_or_else(|| Error::dim("affine", xs.shape(), ws.shape()))?;
        let (wn, m) = match ws.shape() {
            [a, b] => (*a, *b),
            _ => return Err(Error::dim("affine", xs.shape(), ws.shape())),
        };
        if n != wn || xs.shape().is_empty() {
            return Err(Error::dim("affine", xs.shape(), ws.shape()));
        }
        if let Some(b) = b {
            let bs = self.value(b);
            if bs.shape() != [m] {
                return Err(Error::dim("affine bias", ws.shape(), bs.shape()));
            }
        }
        let xd = xs.data();
        let wd = ws.data();
        let mut out = vec![0.0; rows * m];
        for r in 0..rows {
            let orow = &mut out[r * m..(r + 1) * m];
            if let Some(b) = b {
                orow.copy_from_slice(self.nodes[b.0].value.data());
            }
            for (i, &xi) in xd[r * n..(r + 1) * n].iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let wrow = &wd[i * m..(i + 1) * m];
                for (o, &wij) in orow.iter_mut().zip(wrow) {
                    *o += xi * wij;
                }
            }
        }
        let shape = if xs.shape().len() == 1 {
            vec![m]
        } else {
            vec![rows, m]
        };
        let rg = self.rg(x) || self.rg(w) || b.map_or(false, |b| self.rg(b));
        Ok(self.push(Tensor::new(shape, out)?, Op::Affine { x, w, b }, rg))
    }

    pub fn unary(&mut self, kind: UnaryOp, x: Var) -> Result<Var> {
        let xs = self.value(x);
        if kind == UnaryOp::Log {
            if let Some(bad) = xs.data().iter().find(|v| **v <= 0.0) {
                return Err(Error::Domain(format!("log of non-positive value {bad}")));
            }
        }
        let f: fn(f64) -> f64 = match kind {
            UnaryOp::Tanh => f64::tanh,
            UnaryOp::Sigmoid => sigmoid,
            UnaryOp::Exp => f64::exp,
            UnaryOp::Log => f64::ln,
            UnaryOp::Square => |v| v * v,
            UnaryOp::Neg => |v| -v,
        };
        let data = xs.data().iter().map(|v| f(*v)).collect();
        let value = Tensor::new(xs.shape().to_vec(), data)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Unary { kind, x }, rg))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Tanh, x).expect("tanh is total")
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Sigmoid, x).expect("sigmoid is total")
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Exp, x).expect("exp is total")
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(UnaryOp::Log, x)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Square, x).expect("square is total")
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Neg, x).expect("neg is total")
    }

    /// Elementwise binary operation on equal shapes.
    pub fn binary(&mut self, kind: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim("elementwise", av.shape(), bv.shape()));
        }
        let f: fn(f64, f64) -> f64 = match kind {
            BinaryOp::Add => |x, y| x + y,
            BinaryOp::Sub => |x, y| x - y,
            BinaryOp::Mul => |x, y| x * y,
            BinaryOp::Min => f64::min,
        };
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Binary { kind, a, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Min, a, b)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let xs = self.value(x);
        let data = xs.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(xs.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Scale { x, factor }, rg)
    }

    /// Adds a constant to every element.
    pub fn shift(&mut self, x: Var, offset: f64) -> Var {
        let xs = self.value(x);
        let data = xs.data().iter().map(|v| v + offset).collect();
        let value = Tensor::new(xs.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Shift { x }, rg)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    /// Sum of a list of scalars (or equal-shape tensors).
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let (first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::Contract("add_all of an empty list".into()))?;
        let mut acc = *first;
        for t in rest {
            acc = self.add(acc, *t)?;
        }
        Ok(acc)
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for p in parts {
            let v = self.value(*p);
            if v.shape().len() > 1 {
                return Err(Error::dim("concat", v.shape(), &[]));
            }
            data.extend_from_slice(v.data());
        }
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(
            Tensor::vector(data),
            Op::Concat {
                parts: parts.to_vec(),
            },
            rg,
        ))
    }

    /// Contiguous sub-vector `x[start..start + len]`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xs = self.value(x);
        if xs.shape().len() != 1 || start + len > xs.len() {
            return Err(Error::dim("slice", xs.shape(), &[start, len]));
        }
        let data = xs.data()[start..start + len].to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::vector(data), Op::Slice { x, start }, rg))
    }

    /// Single element of a vector as a scalar.
    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var> {
        let xs = self.value(x);
        if index >= xs.len() {
            return Err(Error::dim("pick", xs.shape(), &[index]));
        }
        let v = xs.data()[index];
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(v), Op::Pick { x, index }, rg))
    }

    /// Elementwise clamp; the gradient is zero where the bound is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let xs = self.value(x);
        let data = xs.data().iter().map(|v| v.clamp(lo, hi)).collect();
        let value = Tensor::new(xs.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Clamp { x, lo, hi }, rg)
    }

    /// Stop-gradient: same value, no path back to `x`.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.push(value, Op::Detach, false)
    }

    /// Numerically stable log-softmax over a vector.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x);
        if xs.shape().len() != 1 {
            return Err(Error::dim("log_softmax", xs.shape(), &[]));
        }
        let data = log_softmax(xs.data());
        let rg = self.rg(x);
        Ok(self.push(Tensor::vector(data), Op::LogSoftmax { x }, rg))
    }

    /// Log-density of `x` under a diagonal Gaussian, summed over dimensions.
    pub fn gaussian_logpdf(&mut self, x: Var, mean: Var, log_std: Var) -> Result<Var> {
        let (xs, ms, ls) = (self.value(x), self.value(mean), self.value(log_std));
        if xs.shape() != ms.shape() {
            return Err(Error::dim("gaussian_logpdf", xs.shape(), ms.shape()));
        }
        if ms.shape() != ls.shape() {
            return Err(Error::dim("gaussian_logpdf", ms.shape(), ls.shape()));
        }
        let lp = gaussian_logpdf(xs.data(), ms.data(), ls.data());
        let rg = self.rg(x) || self.rg(mean) || self.rg(log_std);
        Ok(self.push(
            Tensor::scalar(lp),
            Op::GaussianLogpdf { x, mean, log_std },
            rg,
        ))
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate over every path
    /// that reaches a node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if nodes[v.0].requires_grad {
                let slot =
                    grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
                f(slot);
            }
        };
        match &node.op {
            Op::Leaf | Op::Param | Op::Detach => {}
            Op::Affine { x, w, b } => {
                let xv = nodes[x.0].value.data();
                let wv = nodes[w.0].value.data();
                let m = node.value.as_rows_cols().expect("affine output").1;
                let n = nodes[w.0].value.shape()[0];
                let rows = g.len() / m;
                acc(*x, &mut |gx| {
                    for r in 0..rows {
                        let grow = &g[r * m..(r + 1) * m];
                        for i in 0..n {
                            let wrow = &wv[i * m..(i + 1) * m];
                            gx[r * n + i] += grow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                });
                acc(*w, &mut |gw| {
                    for r in 0..rows {
                        let grow = &g[r * m..(r + 1) * m];
                        for i in 0..n {
                            let xi = xv[r * n + i];
                            if xi == 0.0 {
                                continue;
                            }
                            for (o, gj) in gw[i * m..(i + 1) * m].iter_mut().zip(grow) {
                                *o += xi * gj;
                            }
                        }
                    }
                });
                if let Some(b) = b {
                    acc(*b, &mut |gb| {
                        for r in 0..rows {
                            for (o, gj) in gb.iter_mut().zip(&g[r * m..(r + 1) * m]) {
                                *o += gj;
                            }
                        }
                    });
                }
            }
            Op::Unary { kind, x } => {
                let xv = nodes[x.0].value.data();
                let yv = node.value.data();
                let kind = *kind;
                acc(*x, &mut |gx| {
                    for k in 0..gx.len() {
                        let d = match kind {
                            UnaryOp::Tanh => 1.0 - yv[k] * yv[k],
                            UnaryOp::Sigmoid => yv[k] * (1.0 - yv[k]),
                            UnaryOp::Exp => yv[k],
                            UnaryOp::Log => 1.0 / xv[k],
                            UnaryOp::Square => 2.0 * xv[k],
                            UnaryOp::Neg => -1.0,
                        };
                        gx[k] += g[k] * d;
                    }
                });
            }
            Op::Binary { kind, a, b } => {
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                let kind = *kind;
                acc(*a, &mut |ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k]
                            * match kind {
                                BinaryOp::Add | BinaryOp::Sub => 1.0,
                                BinaryOp::Mul => bv[k],
                                // ties route the gradient to the first argument
                                BinaryOp::Min => f64::from(u8::from(av[k] <= bv[k])),
                            };
                    }
                });
                acc(*b, &mut |gb| {
                    for k in 0..gb.len() {
                        gb[k] += g[k]
                            * match kind {
                                BinaryOp::Add => 1.0,
                                BinaryOp::Sub => -1.0,
                                BinaryOp::Mul => av[k],
                                BinaryOp::Min => f64::from(u8::from(av[k] > bv[k])),
                            };
                    }
                });
            }
            Op::Scale { x, factor } => acc(*x, &mut |gx| {
                for (o, gk) in gx.iter_mut().zip(g) {
                    *o += gk * factor;
                }
            }),
            Op::Shift { x } => acc(*x, &mut |gx| {
                for (o, gk) in gx.iter_mut().zip(g) {
                    *o += gk;
                }
            }),
            Op::Sum { x } => acc(*x, &mut |gx| {
                for o in gx.iter_mut() {
                    *o += g[0];
                }
            }),
            Op::Concat { parts } => {
                let mut offset = 0;
                for p in parts {
                    let len = nodes[p.0].value.len();
                    let seg = &g[offset..offset + len];
                    acc(*p, &mut |gp| {
                        for (o, gk) in gp.iter_mut().zip(seg) {
                            *o += gk;
                        }
                    });
                    offset += len;
                }
            }
            Op::Slice { x, start } => {
                let start = *start;
                acc(*x, &mut |gx| {
                    for (o, gk) in gx[start..start + g.len()].iter_mut().zip(g) {
                        *o += gk;
                    }
                });
            }
            Op::Pick { x, index } => acc(*x, &mut |gx| gx[*index] += g[0]),
            Op::Clamp { x, lo, hi } => {
                let xv = nodes[x.0].value.data();
                acc(*x, &mut |gx| {
                    for k in 0..gx.len() {
                        if xv[k] >= *lo && xv[k] <= *hi {
                            gx[k] += g[k];
                        }
                    }
                });
            }
            Op::LogSoftmax { x } => {
                let yv = node.value.data();
                let gsum: f64 = g.iter().sum();
                acc(*x, &mut |gx| {
                    for k in 0..gx.len() {
                        gx[k] += g[k] - yv[k].exp() * gsum;
                    }
                });
            }
            Op::GaussianLogpdf { x, mean, log_std } => {
                let xv = nodes[x.0].value.data();
                let mv = nodes[mean.0].value.data();
                let lv = nodes[log_std.0].value.data();
                let g0 = g[0];
                // d/dx = -(x-mu)/sigma^2, d/dmu = -d/dx, d/dlogsigma = u^2 - 1
                let dx: Vec<f64> = (0..xv.len())
                    .map(|k| -(xv[k] - mv[k]) * (-2.0 * lv[k]).exp())
                    .collect();
                acc(*x, &mut |gx| {
                    for k in 0..gx.len() {
                        gx[k] += g0 * dx[k];
                    }
                });
                acc(*mean, &mut |gm| {
                    for k in 0..gm.len() {
                        gm[k] -= g0 * dx[k];
                    }
                });
                acc(*log_std, &mut |gl| {
                    for k in 0..gl.len() {
                        let u = (xv[k] - mv[k]) * (-lv[k]).exp();
                        gl[k] += g0 * (u * u - 1.0);
                    }
                });
            }
        }
    }

    /// Gradient of the last `backward` loss with respect to `v`; zeros when
    /// `v` was not reached or does not track gradients.
    pub fn grad(&self, v: Var) -> Tensor {
        let value = &self.nodes[v.0].value;
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => Tensor::new(value.shape().to_vec(), g.clone()).expect("grad shape"),
            None => Tensor::zeros(value.shape()),
        }
    }

    /// Adds the gradients of every bound parameter into `store`.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (name, v) in &self.params {
            if let Some(Some(g)) = self.grads.get(v.0) {
                store.add_grad(name, g);
            }
        }
    }

    /// Gradient per bound parameter name.
    pub fn param_grads(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<_> = self
            .params
            .iter()
            .map(|(name, v)| (name.clone(), self.grad(*v)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// Plain-value diagonal Gaussian log-density.
pub fn gaussian_logpdf(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), l)| {
            let u = (x - m) * (-l).exp();
            -0.5 * u * u - l - HALF_LN_2PI
        })
        .sum()
}
