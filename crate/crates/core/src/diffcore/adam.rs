use std::collections::BTreeMap;

use super::params::ParamStore;
use super::tensor::Tensor;

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.second.get(name)
    }
}

/// One bias-corrected Adam update over every parameter in name order, then
/// zeroes the gradients.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let m = state
            .first
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(p.value.shape()));
        let v = state
            .second
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(p.value.shape()));
        let (m, v) = (m.data_mut(), v.data_mut());
        let g = p.grad.data();
        for (k, w) in p.value.data_mut().iter_mut().enumerate() {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *w -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    params.zero_grads();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::vector(vec![v])).unwrap();
        s
    }

    #[test]
    fn zero_grads_leave_params_fixed() {
        let mut s = ParamStore::new();
        s.insert("a", Tensor::vector(vec![1.0, -2.0])).unwrap();
        s.insert("b", Tensor::zeros(&[2, 2])).unwrap();
        let before = s.clone();
        let mut st = AdamState::new(1e-3);
        for _ in 0..5 {
            adam_step(&mut s, &mut st);
        }
        assert_eq!(s, before);
        assert_eq!(st.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // hand-run recurrence: m=0.1, v=0.001, m_hat=1, v_hat=1
        let mut s = scalar_store(0.5);
        s.add_grad("w", &[1.0]);
        let mut st = AdamState::new(0.1);
        adam_step(&mut s, &mut st);
        let expected = 0.5 - 0.1 / (1.0 + 1e-8);
        assert!((s.value("w").unwrap().item() - expected).abs() < 1e-15);
        assert_eq!(s.grad("w").unwrap().item(), 0.0);

        // second step with grad 1 again: m=0.19, v=0.001999
        s.add_grad("w", &[1.0]);
        adam_step(&mut s, &mut st);
        let m_hat: f64 = 0.19 / (1.0 - 0.81);
        let v_hat: f64 = 0.001_999 / (1.0 - 0.998_001);
        let expected2 = expected - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((s.value("w").unwrap().item() - expected2).abs() < 1e-12);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let run = || {
            let mut s = scalar_store(0.3);
            let mut st = AdamState::new(0.01);
            for k in 0..2 {
                s.add_grad("w", &[0.7 - k as f64]);
                adam_step(&mut s, &mut st);
            }
            s.value("w").unwrap().item().to_bits()
        };
        assert_eq!(run(), run());
    }
}
