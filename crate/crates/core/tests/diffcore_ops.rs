use lhz::diffcore::{adam_step, grad_check, AdamState, Graph, ParamStore, Tensor, Var};
use lhz::error::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 100;
const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// `sum(c ⊙ y)` for fixed random weights `c`, so every output entry matters.
fn weighted_sum(g: &mut Graph, y: Var, c: &[f64]) -> Result<Var> {
    if g.value(y).shape().is_empty() {
        return Ok(g.scale(y, c[0]));
    }
    let c = g.constant_vec(c);
    let p = g.mul(y, c)?;
    Ok(g.sum(p))
}

/// Finite-difference check of `op` over `TRIALS` random inputs in `[lo, hi]`.
fn check_op<F>(name: &str, inputs: &[(&str, usize)], lo: f64, hi: f64, out_len: usize, op: F)
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(name.bytes().map(u64::from).sum());
    for trial in 0..TRIALS {
        let mut params = ParamStore::new();
        for (n, len) in inputs {
            params.insert(*n, Tensor::vector(uniform(&mut rng, *len, lo, hi))).unwrap();
        }
        let c = uniform(&mut rng, out_len, -2.0, 2.0);
        let f = |g: &mut Graph, p: &ParamStore| {
            let vars: Vec<Var> = inputs.iter().map(|(n, _)| g.param(p, n)).collect::<Result<_>>()?;
            let y = op(g, &vars)?;
            weighted_sum(g, y, &c)
        };
        let report = grad_check(f, &params, EPS, TOL).unwrap();
        assert!(report.passed(), "{name} trial {trial}: {report:?}");
    }
}

#[test]
fn elementwise_ops_match_finite_differences() {
    check_op("tanh", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.tanh(v[0])));
    check_op("sigmoid", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.sigmoid(v[0])));
    check_op("exp", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.exp(v[0])));
    check_op("square", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.square(v[0])));
    check_op("neg", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.neg(v[0])));
    check_op("scale", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.scale(v[0], -1.7)));
    check_op("shift", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.shift(v[0], 0.3)));
    check_op("clamp", &[("x", 5)], -2.0, 2.0, 5, |g, v| Ok(g.clamp(v[0], -1.0, 1.0)));
    // log needs a positive domain.
    check_op("log", &[("x", 5)], 0.05, 2.0, 5, |g, v| g.log(v[0]));
}

#[test]
fn binary_ops_match_finite_differences() {
    check_op("add", &[("a", 4), ("b", 4)], -2.0, 2.0, 4, |g, v| g.add(v[0], v[1]));
    check_op("sub", &[("a", 4), ("b", 4)], -2.0, 2.0, 4, |g, v| g.sub(v[0], v[1]));
    check_op("mul", &[("a", 4), ("b", 4)], -2.0, 2.0, 4, |g, v| g.mul(v[0], v[1]));
    check_op("min", &[("a", 4), ("b", 4)], -2.0, 2.0, 4, |g, v| g.min(v[0], v[1]));
    check_op("add_all", &[("a", 3), ("b", 3), ("c", 3)], -2.0, 2.0, 3, |g, v| g.add_all(v));
}

#[test]
fn structural_ops_match_finite_differences() {
    check_op("sum", &[("x", 6)], -2.0, 2.0, 1, |g, v| Ok(g.sum(v[0])));
    check_op("concat", &[("a", 2), ("b", 3)], -2.0, 2.0, 5, |g, v| g.concat(v));
    check_op("slice", &[("x", 6)], -2.0, 2.0, 3, |g, v| g.slice(v[0], 2, 3));
    check_op("pick", &[("x", 4)], -2.0, 2.0, 1, |g, v| g.pick(v[0], 2));
    check_op("log_softmax", &[("x", 5)], -2.0, 2.0, 5, |g, v| g.log_softmax(v[0]));
    check_op(
        "gaussian_logpdf",
        &[("x", 3), ("mu", 3), ("ls", 3)],
        -2.0,
        2.0,
        1,
        |g, v| g.gaussian_logpdf(v[0], v[1], v[2]),
    );
}

#[test]
fn affine_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..TRIALS {
        let mut params = ParamStore::new();
        params.insert("x", Tensor::vector(uniform(&mut rng, 3, -2.0, 2.0))).unwrap();
        params.insert("w", Tensor::matrix(3, 4, uniform(&mut rng, 12, -2.0, 2.0)).unwrap()).unwrap();
        params.insert("b", Tensor::vector(uniform(&mut rng, 4, -2.0, 2.0))).unwrap();
        let c = uniform(&mut rng, 4, -2.0, 2.0);
        let f = |g: &mut Graph, p: &ParamStore| {
            let (x, w, b) = (g.param(p, "x")?, g.param(p, "w")?, g.param(p, "b")?);
            let y = g.affine(x, w, Some(b))?;
            weighted_sum(g, y, &c)
        };
        let report = grad_check(f, &params, EPS, TOL).unwrap();
        assert!(report.passed(), "affine trial {trial}: {report:?}");
    }
}

#[test]
fn affine_matches_naive_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = uniform(&mut rng, 3, -2.0, 2.0);
    let w = uniform(&mut rng, 12, -2.0, 2.0);
    let b = uniform(&mut rng, 4, -2.0, 2.0);
    let mut g = Graph::new();
    let xv = g.constant_vec(&x);
    let wv = g.constant(Tensor::matrix(3, 4, w.clone()).unwrap());
    let bv = g.constant_vec(&b);
    let y = g.affine(xv, wv, Some(bv)).unwrap();
    for j in 0..4 {
        let mut acc = b[j];
        for i in 0..3 {
            acc += x[i] * w[i * 4 + j];
        }
        assert!((g.data(y)[j] - acc).abs() < 1e-12);
    }
}

#[test]
fn composed_graph_with_shared_nodes() {
    // `h` feeds three consumers; gradients must sum over all of them.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..TRIALS {
        let mut params = ParamStore::new();
        params.insert("x", Tensor::vector(uniform(&mut rng, 3, -2.0, 2.0))).unwrap();
        params.insert("w", Tensor::matrix(3, 3, uniform(&mut rng, 9, -2.0, 2.0)).unwrap()).unwrap();
        let f = |g: &mut Graph, p: &ParamStore| {
            let (x, w) = (g.param(p, "x")?, g.param(p, "w")?);
            let a = g.affine(x, w, None)?;
            let h = g.tanh(a);
            let s = g.square(h);
            let m = g.mul(h, x)?;
            let l = g.log_softmax(h)?;
            let t = g.add_all(&[s, m, l])?;
            Ok(g.sum(t))
        };
        let report = grad_check(f, &params, EPS, TOL).unwrap();
        assert!(report.passed(), "{report:?}");
    }
}

#[test]
fn exp_log_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = uniform(&mut rng, 50, 0.01, 10.0);
    let mut g = Graph::new();
    let v = g.constant_vec(&x);
    let l = g.log(v).unwrap();
    let e = g.exp(l);
    for (a, b) in x.iter().zip(g.data(e)) {
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
}

#[test]
fn gaussian_density_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..5 {
        let mu = rng.gen_range(-2.0..2.0);
        let ls: f64 = rng.gen_range(-1.0..1.0);
        let sigma = ls.exp();
        let logpdf = |x: f64| {
            let mut g = Graph::inference();
            let (xv, mv, sv) = (g.constant_vec(&[x]), g.constant_vec(&[mu]), g.constant_vec(&[ls]));
            let l = g.gaussian_logpdf(xv, mv, sv).unwrap();
            g.scalar(l)
        };
        let (a, b, n) = (mu - 12.0 * sigma, mu + 12.0 * sigma, 20_000);
        let h = (b - a) / n as f64;
        let mut z = 0.5 * (logpdf(a).exp() + logpdf(b).exp());
        for i in 1..n {
            z += logpdf(a + i as f64 * h).exp();
        }
        z *= h;
        assert!((z - 1.0).abs() < 1e-8, "integral {z}");
        let x = rng.gen_range(-2.0..2.0);
        assert!((logpdf(x) - (logpdf(x).exp() / z).ln()).abs() < 1e-8);
    }
}

#[test]
fn adam_first_step_moves_by_the_learning_rate() {
    let mut p = ParamStore::new();
    p.insert("w", Tensor::scalar(0.5)).unwrap();
    p.iter_mut().next().unwrap().1.grad = Tensor::scalar(1.0);
    let mut adam = AdamState::new(0.1);
    adam_step(&mut p, &mut adam);
    // m̂ = 1, v̂ = 1, step = lr · 1 / (1 + eps).
    let expected = 0.5 - 0.1 / (1.0 + adam.epsilon);
    assert!((p.value("w").unwrap().item() - expected).abs() < 1e-15);
    assert_eq!(p.grad("w").unwrap().item(), 0.0);
    assert_eq!(adam.step_count(), 1);
}

#[test]
fn adam_steps_are_reproducible() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut p = ParamStore::new();
        p.insert("w", Tensor::vector(uniform(&mut rng, 4, -1.0, 1.0))).unwrap();
        let mut adam = AdamState::new(0.01);
        for _ in 0..2 {
            let g = uniform(&mut rng, 4, -1.0, 1.0);
            p.iter_mut().next().unwrap().1.grad = Tensor::vector(g);
            adam_step(&mut p, &mut adam);
        }
        p.checksum()
    };
    assert_eq!(run(), run());
}

#[test]
fn corrupted_gradient_is_detected() {
    let mut params = ParamStore::new();
    params.insert("w", Tensor::vector(vec![0.3, -0.7])).unwrap();
    let f = |g: &mut Graph, p: &ParamStore| {
        let w = g.param(p, "w")?;
        let s = g.square(w);
        Ok(g.sum(s))
    };
    let mut analytic = lhz::diffcore::analytic_gradients(&f, &params).unwrap();
    analytic.get_mut("w").unwrap().data_mut()[0] += 0.1;
    let report = lhz::diffcore::compare_gradients(&f, &params, &analytic, EPS, TOL).unwrap();
    assert!(!report.passed() && report.max_rel_error > TOL);
}

proptest! {
    #[test]
    fn adam_with_zero_grads_is_a_fixed_point(values in prop::collection::vec(-5.0f64..5.0, 1..8), steps in 1usize..5) {
        let mut p = ParamStore::new();
        p.insert("w", Tensor::vector(values.clone())).unwrap();
        let mut adam = AdamState::new(0.1);
        for _ in 0..steps {
            adam_step(&mut p, &mut adam);
        }
        prop_assert_eq!(p.value("w").unwrap().data(), &values[..]);
    }

    #[test]
    fn forward_is_finite_and_deterministic(x in prop::collection::vec(-2.0f64..2.0, 1..8)) {
        let eval = |x: &[f64]| {
            let mut g = Graph::new();
            let v = g.constant_vec(x);
            let t = g.tanh(v);
            let e = g.exp(t);
            let l = g.log_softmax(e).unwrap();
            let s = g.sigmoid(l);
            g.data(s).to_vec()
        };
        let a = eval(&x);
        prop_assert!(a.iter().all(|v| v.is_finite()));
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), eval(&x).iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn tensor_shape_matches_data(rows in 1usize..5, cols in 1usize..5) {
        let t = Tensor::matrix(rows, cols, vec![0.0; rows * cols]).unwrap();
        prop_assert_eq!(t.shape().iter().product::<usize>(), t.len());
        prop_assert!(Tensor::matrix(rows, cols, vec![0.0; rows * cols + 1]).is_err());
    }

    #[test]
    fn loss_grad_wrt_itself_is_one(x in prop::collection::vec(-2.0f64..2.0, 1..6)) {
        let mut g = Graph::new();
        let v = g.variable(Tensor::vector(x));
        let s = g.sum(v);
        g.backward(s).unwrap();
        let grad = g.grad(s);
        prop_assert_eq!(grad.data(), &[1.0]);
    }
}
