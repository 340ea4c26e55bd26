use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffcore::{Graph, Tensor};
use crate::trajectory::{Action, Trajectory};

fn config(kind: ActionKind) -> ModelConfig {
    ModelConfig {
        obs_dim: 3,
        action_dim: 2,
        action_kind: kind,
        latent_dim: 2,
        hidden_dim: 4,
        backward_hidden_dim: 3,
        decoder_hidden_dims: vec![5],
        obs_log_std_min: LOG_STD_MIN,
    }
}

fn model(kind: ActionKind, seed: u64) -> SeqModel {
    SeqModel::new(config(kind), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn latent(z: Vec<f64>) -> LatentSample {
    LatentSample {
        epsilon: vec![0.0; z.len()],
        z,
        source: LatentSource::Prior,
    }
}

fn random_trajectory(len: usize, kind: ActionKind, seed: u64) -> Trajectory {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Trajectory::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
    for _ in 0..len {
        let a = match kind {
            ActionKind::Categorical => Action::Discrete(rng.gen_range(0..2)),
            ActionKind::Continuous => Action::Continuous(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]),
        };
        t.push(a, 0.0, (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    t
}

#[test]
fn forward_transition_is_deterministic() {
    let m = model(ActionKind::Categorical, 1);
    let s0 = ForwardState {
        h: vec![0.1, -0.2, 0.3, 0.0],
        c: vec![0.5, 0.5, -1.0, 2.0],
    };
    let z = latent(vec![0.3, -0.7]);
    let a = m.forward_transition(&[1.0, 0.0, -1.0], &s0, &z).unwrap();
    let b = m.forward_transition(&[1.0, 0.0, -1.0], &s0, &z).unwrap();
    assert_eq!(a, b);
    assert!(a.h.iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn zero_weights_give_zero_state() {
    let mut m = model(ActionKind::Categorical, 2);
    m.zero_head("fwd");
    let s = m
        .forward_transition(&[1.0, 2.0, 3.0], &ForwardState::zeros(4), &latent(vec![1.0, 1.0]))
        .unwrap();
    assert!(s.h.iter().all(|v| *v == 0.0));
}

#[test]
fn forward_transition_matches_scalar_oracle() {
    let cfg = ModelConfig {
        obs_dim: 1,
        action_dim: 1,
        action_kind: ActionKind::Categorical,
        latent_dim: 1,
        hidden_dim: 2,
        backward_hidden_dim: 1,
        decoder_hidden_dims: vec![1],
        obs_log_std_min: LOG_STD_MIN,
    };
    let mut m = SeqModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    // input rows [o, z, h1, h2], columns [i1 i2 f1 f2 g1 g2 o1 o2]
    let w: Vec<f64> = (0..32).map(|k| 0.1 * ((k % 7) as f64) - 0.25).collect();
    let b: Vec<f64> = (0..8).map(|k| 0.05 * k as f64 - 0.1).collect();
    *m.params.value_mut("fwd.w").unwrap() = Tensor::matrix(4, 8, w.clone()).unwrap();
    *m.params.value_mut("fwd.b").unwrap() = Tensor::vector(b.clone());
    let prev = ForwardState {
        h: vec![0.2, -0.4],
        c: vec![0.7, -0.1],
    };
    let (o, z) = (0.9, -0.3);
    let got = m.forward_transition(&[o], &prev, &latent(vec![z])).unwrap();

    let x = [o, z, prev.h[0], prev.h[1]];
    let pre = |col: usize| b[col] + (0..4).map(|r| x[r] * w[r * 8 + col]).sum::<f64>();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    for k in 0..2 {
        let i = sig(pre(k));
        let f = sig(pre(2 + k));
        let g = pre(4 + k).tanh();
        let og = sig(pre(6 + k));
        let c = f * prev.c[k] + i * g;
        let h = og * c.tanh();
        assert!((got.c[k] - c).abs() < 1e-14);
        assert!((got.h[k] - h).abs() < 1e-14);
    }
}

#[test]
fn backward_encode_base_case_and_causality() {
    let m = model(ActionKind::Categorical, 4);
    let o1 = vec![0.3, -0.2, 0.8];
    let single = m.backward_encode(&[o1.clone()]).unwrap();
    assert_eq!(single.len(), 1);

    let mut g = Graph::inference();
    let bound = m.bind(&mut g).unwrap();
    let zero = cell::zero_state(&mut g, 3);
    let o = g.constant_vec(&o1);
    let manual = cell::lstm_step(&mut g, &bound.bwd, &[o], &zero).unwrap();
    assert_eq!(single[0], ForwardState::read(&g, &manual));

    let obs: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64 * 0.1, 0.5, -0.3]).collect();
    let base = m.backward_encode(&obs).unwrap();
    let mut early = obs.clone();
    early[1][0] += 0.7;
    let perturbed = m.backward_encode(&early).unwrap();
    for t in 2..5 {
        assert_eq!(base[t], perturbed[t], "b_{t} must ignore o_1");
    }
    assert_ne!(base[1], perturbed[1]);

    let mut late = obs.clone();
    late[4][2] += 0.5;
    let perturbed = m.backward_encode(&late).unwrap();
    for t in 0..5 {
        assert_ne!(base[t].h, perturbed[t].h, "b_{t} must see o_T");
    }
    assert!(m.backward_encode(&[]).is_err());
}

#[test]
fn prior_and_posterior_heads() {
    let mut m = model(ActionKind::Categorical, 5);
    let h1 = ForwardState {
        h: vec![0.1, 0.2, 0.3, 0.4],
        c: vec![0.0; 4],
    };
    let h2 = ForwardState {
        h: vec![-0.5, 0.2, 0.0, 0.9],
        c: vec![0.0; 4],
    };
    let b = ForwardState {
        h: vec![0.6, -0.6, 0.2],
        c: vec![0.0; 3],
    };
    assert_eq!(m.prior(&h1).unwrap(), m.prior(&h1).unwrap());
    assert_ne!(m.prior(&h1).unwrap().mean, m.prior(&h2).unwrap().mean);
    assert_ne!(m.prior(&h1).unwrap().mean, m.posterior(&h1, &b).unwrap().mean);

    m.zero_head("prior");
    m.zero_head("post");
    assert_eq!(m.prior(&h1).unwrap(), DiagGaussian::standard(2));
    assert_eq!(m.posterior(&h1, &b).unwrap(), DiagGaussian::standard(2));
}

#[test]
fn posterior_mean_depends_on_b() {
    let m = model(ActionKind::Categorical, 6);
    let h = ForwardState {
        h: vec![0.1, 0.2, 0.3, 0.4],
        c: vec![0.0; 4],
    };
    let mut b = ForwardState {
        h: vec![0.6, -0.6, 0.2],
        c: vec![0.0; 3],
    };
    let eps = 1e-6;
    let base = m.posterior(&h, &b).unwrap().mean;
    b.h[0] += eps;
    let moved = m.posterior(&h, &b).unwrap().mean;
    let slope: f64 = base.iter().zip(&moved).map(|(a, c)| ((c - a) / eps).abs()).sum();
    assert!(slope > 1e-6, "finite-difference slope {slope}");
}

#[test]
fn tied_posterior_equals_prior() {
    let mut m = model(ActionKind::Categorical, 7);
    m.tie_posterior_to_prior().unwrap();
    let h = ForwardState {
        h: vec![0.1, -0.2, 0.3, 0.4],
        c: vec![0.0; 4],
    };
    let b = ForwardState {
        h: vec![0.9, -0.6, 0.2],
        c: vec![0.0; 3],
    };
    assert_eq!(m.prior(&h).unwrap(), m.posterior(&h, &b).unwrap());
}

#[test]
fn observation_decoder() {
    let m = model(ActionKind::Categorical, 8);
    let h = ForwardState {
        h: vec![0.1, -0.2, 0.3, 0.4],
        c: vec![0.0; 4],
    };
    let a = Action::Discrete(1);
    let d1 = m.decode_observation(&a, &h, &latent(vec![0.1, 0.2])).unwrap();
    let d2 = m.decode_observation(&a, &h, &latent(vec![0.1, 0.2])).unwrap();
    assert_eq!(d1, d2);
    assert!(d1.log_prob(&[0.3, 0.3, -2.0]).is_finite());
    let d3 = m.decode_observation(&a, &h, &latent(vec![-0.9, 0.2])).unwrap();
    assert_ne!(d1.mean, d3.mean);
}

#[test]
fn categorical_action_decoder() {
    let mut m = model(ActionKind::Categorical, 9);
    let h = ForwardState::zeros(4);
    let ActionDistValue::Categorical { log_probs } = m.decode_action(&h, &latent(vec![0.4, 0.1])).unwrap() else {
        panic!("categorical expected")
    };
    let total: f64 = log_probs.iter().map(|l| l.exp()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    m.zero_head("dec_act");
    let ActionDistValue::Categorical { log_probs } = m.decode_action(&h, &latent(vec![0.4, 0.1])).unwrap() else {
        panic!("categorical expected")
    };
    for lp in log_probs {
        assert!((lp.exp() - 0.5).abs() < 1e-15);
    }
}

#[test]
fn continuous_action_decoder_matches_gaussian_oracle() {
    let m = model(ActionKind::Continuous, 10);
    let h = ForwardState {
        h: vec![0.3, 0.1, -0.2, 0.0],
        c: vec![0.0; 4],
    };
    let dist = m.decode_action(&h, &latent(vec![0.2, -0.2])).unwrap();
    let ActionDistValue::Gaussian(d) = &dist else {
        panic!("gaussian expected")
    };
    let a = vec![0.25, -0.5];
    let oracle: f64 = (0..2)
        .map(|k| {
            let s = d.log_std[k].exp();
            let u = (a[k] - d.mean[k]) / s;
            -0.5 * u * u - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        })
        .sum();
    assert!((dist.log_prob(&Action::Continuous(a)).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn auxiliary_decoder_unit_variance() {
    let mut m = model(ActionKind::Categorical, 11);
    let z = latent(vec![0.5, -1.5]);
    let d = m.aux_decode(&z).unwrap();
    assert!(d.log_std.iter().all(|l| *l == 0.0));
    let b = [0.2, 0.1, -0.3];
    let sq: f64 = b.iter().zip(&d.mean).map(|(x, m)| (x - m) * (x - m)).sum();
    let expected = -0.5 * sq - 1.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((d.log_prob(&b) - expected).abs() < 1e-12);

    m.zero_head("aux");
    let d = m.aux_decode(&z).unwrap();
    assert!((d.log_prob(&[0.0; 3]) + 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
}

#[test]
fn reparameterize_examples() {
    let d = DiagGaussian {
        mean: vec![0.7, -1.0],
        log_std: vec![0.3, 0.0],
    };
    assert_eq!(reparameterize_values(&d, &[0.0, 0.0]), d.mean);
    let d = DiagGaussian {
        mean: vec![0.0],
        log_std: vec![2.0f64.ln()],
    };
    assert!((reparameterize_values(&d, &[1.0])[0] - 2.0).abs() < 1e-15);

    let mut g = Graph::new();
    let mean = g.variable(Tensor::vector(vec![0.5]));
    let log_std = g.variable(Tensor::vector(vec![0.1]));
    let z = reparameterize(&mut g, &GaussVars { mean, log_std }, &[2.0]).unwrap();
    let loss = g.sum(z);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(mean).data(), &[1.0]);
    assert!((g.grad(log_std).data()[0] - 2.0 * 0.1f64.exp()).abs() < 1e-15);
}

#[test]
fn reparameterized_moments() {
    let d = DiagGaussian {
        mean: vec![1.0],
        log_std: vec![0.5f64.ln()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng).z[0]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    // three standard errors: 0.5/sqrt(n) for the mean, 0.5/sqrt(2n) for the std
    assert!((mean - 1.0).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "mean {mean}");
    assert!((std - 0.5).abs() < 3.0 * 0.5 / (2.0 * n as f64).sqrt(), "std {std}");
    assert!((mean - 1.0).abs() < 0.01 && (std - 0.5).abs() < 0.01);
}

#[test]
fn generate_shapes_and_determinism() {
    let m = model(ActionKind::Categorical, 13);
    let o0 = [0.1, 0.2, 0.3];
    let h0 = m.initial_state(&o0).unwrap();
    let run = |seed| {
        m.generate(&o0, &h0, 6, &mut ChaCha8Rng::seed_from_u64(seed), GenerateOptions::default())
            .unwrap()
    };
    let a = run(1);
    assert_eq!(a.trajectory.observations.len(), 7);
    assert_eq!(a.trajectory.actions.len(), 6);
    assert_eq!(a.latents.len(), 6);
    let b = run(1);
    assert_eq!(a.trajectory, b.trajectory);
    assert!(m.generate(&o0, &h0, 0, &mut ChaCha8Rng::seed_from_u64(1), GenerateOptions::default()).is_err());

    let zs: Vec<Vec<f64>> = a.latents.iter().map(|l| l.z.clone()).collect();
    let greedy = GenerateOptions {
        latents: Some(&zs),
        action_mode: DecodeMode::Mode,
        obs_mode: DecodeMode::Mode,
    };
    let g1 = m.generate(&o0, &h0, 6, &mut ChaCha8Rng::seed_from_u64(5), greedy).unwrap();
    let g2 = m.generate(&o0, &h0, 6, &mut ChaCha8Rng::seed_from_u64(99), greedy).unwrap();
    assert_eq!(g1.trajectory, g2.trajectory);
}

#[test]
fn teacher_forced_records() {
    for kind in [ActionKind::Categorical, ActionKind::Continuous] {
        let m = model(kind, 14);
        let traj = random_trajectory(5, kind, 15);
        let mut g = Graph::new();
        let bound = m.bind(&mut g).unwrap();
        let tf = bound
            .teacher_forced_pass(&mut g, &traj, None, LatentMode::Posterior, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(tf.steps.len(), 5);
        for s in &tf.steps {
            assert!(g.scalar(s.obs_ll).is_finite());
            assert!(g.scalar(s.act_ll).is_finite());
            assert!(g.data(s.h_prev.h).iter().all(|v| v.abs() <= 1.0));
            assert!(g.data(s.b).iter().all(|v| v.abs() <= 1.0));
        }
    }
    let m = model(ActionKind::Categorical, 14);
    let mut bad = random_trajectory(3, ActionKind::Categorical, 1);
    bad.observations.pop();
    let mut g = Graph::new();
    let bound = m.bind(&mut g).unwrap();
    assert!(bound
        .teacher_forced_pass(&mut g, &bad, None, LatentMode::Posterior, &mut ChaCha8Rng::seed_from_u64(0))
        .is_err());
}

#[test]
fn forward_state_ignores_the_future() {
    let m = model(ActionKind::Categorical, 16);
    let traj = random_trajectory(6, ActionKind::Categorical, 17);
    let zs: Vec<Vec<f64>> = (0..6).map(|t| vec![0.1 * t as f64, -0.2]).collect();
    let states = |traj: &Trajectory, zs: &[Vec<f64>]| {
        let mut g = Graph::inference();
        let bound = m.bind(&mut g).unwrap();
        let tf = bound
            .teacher_forced_pass(&mut g, traj, None, LatentMode::Given(zs), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        tf.steps.iter().map(|s| g.data(s.h_prev.h).to_vec()).collect::<Vec<_>>()
    };
    let base = states(&traj, &zs);
    let mut later = traj.clone();
    later.observations[5][0] += 1.0;
    let mut zs2 = zs.clone();
    zs2[4][1] += 1.0;
    let moved = states(&later, &zs2);
    // step t reports h_{t-1}; perturbing o_5 and z_5 may only move h_5
    assert_eq!(base[..5], moved[..5]);
    assert_ne!(base[5], moved[5]);
}

#[test]
fn generated_rollout_rescored_reproduces_decoders() {
    let m = model(ActionKind::Categorical, 18);
    let o0 = [0.4, -0.1, 0.0];
    let h0 = m.initial_state(&o0).unwrap();
    let gen = m
        .generate(&o0, &h0, 5, &mut ChaCha8Rng::seed_from_u64(3), GenerateOptions::default())
        .unwrap();
    let zs: Vec<Vec<f64>> = gen.latents.iter().map(|l| l.z.clone()).collect();
    let mut g = Graph::inference();
    let bound = m.bind(&mut g).unwrap();
    let tf = bound
        .teacher_forced_pass(&mut g, &gen.trajectory, None, LatentMode::Given(&zs), &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    for (t, s) in tf.steps.iter().enumerate() {
        let mean = g.data(s.obs_dist.mean);
        assert!(mean.iter().zip(&gen.obs_means[t]).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn checkpoint_round_trip() {
    let m = model(ActionKind::Continuous, 19);
    let ckpt = Checkpoint {
        header: m.config.to_pairs(),
        params: m.params.clone(),
    };
    let mut buf = Vec::new();
    write_checkpoint(&ckpt, &mut buf).unwrap();
    assert!(buf.starts_with(b"obs_dim=3\n"));
    let back = read_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(back, ckpt);
    let cfg = ModelConfig::from_pairs(&back.header).unwrap();
    let restored = SeqModel::from_parts(cfg, back.params).unwrap();
    assert_eq!(restored, m);
}
