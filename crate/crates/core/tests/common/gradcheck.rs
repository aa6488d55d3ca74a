//! Central finite differences against the analytic backward passes.

use guide::agents::{Actor, EncoderKind, NetShape, QNet};
use guide::nn::{LayerSpec, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Relative error with a floor so that gradients that are zero up to
/// rounding compare on an absolute scale.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct CheckStats {
    pub cases: usize,
    pub coordinates: usize,
    pub max_rel_err: f64,
}

impl CheckStats {
    fn absorb(&mut self, errs: &[f64]) {
        self.cases += 1;
        self.coordinates += errs.len();
        for e in errs {
            self.max_rel_err = self.max_rel_err.max(*e);
        }
    }

    pub fn merge(&mut self, other: CheckStats) {
        self.cases += other.cases;
        self.coordinates += other.coordinates;
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err <= TOLERANCE
    }
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Coordinates to probe: all of them when few, otherwise a random subset.
fn probe(len: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        (0..max).map(|_| rng.gen_range(0..len)).collect()
    }
}

/// Checks `L = Σ c ⊙ net(x)` for parameter and input gradients.
pub fn check_network(input_shape: &[usize], specs: &[LayerSpec], batch: usize, seed: u64) -> CheckStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(input_shape, specs, &mut rng).unwrap();
    let mut xshape = vec![batch];
    xshape.extend(input_shape);
    let x = random_tensor(&xshape, &mut rng);
    let out = net.forward(&x).unwrap();
    let c = random_tensor(out.shape(), &mut rng);
    let (grads, dx) = net.backward(&c).unwrap();
    let loss = |net: &Network, x: &Tensor| -> f64 {
        let y = net.infer(x).unwrap();
        y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
    };

    let mut errs = Vec::new();
    let n_params = net.params().count();
    for p in 0..n_params {
        let len = net.params().nth(p).unwrap().len();
        for i in probe(len, 40, &mut rng) {
            let orig = net.params().nth(p).unwrap().data()[i];
            net.params_mut().nth(p).unwrap().data_mut()[i] = orig + H;
            let up = loss(&net, &x);
            net.params_mut().nth(p).unwrap().data_mut()[i] = orig - H;
            let down = loss(&net, &x);
            net.params_mut().nth(p).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            errs.push(rel_err(grads.0[p].data()[i], numeric));
        }
    }
    for i in probe(x.len(), 40, &mut rng) {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let up = loss(&net, &xp);
        xp.data_mut()[i] -= 2.0 * H;
        let down = loss(&net, &xp);
        errs.push(rel_err(dx.data()[i], (up - down) / (2.0 * H)));
    }
    let mut s = CheckStats::default();
    s.absorb(&errs);
    s
}

pub fn dense_case(seed: u64) -> CheckStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd);
    let (i, o) = (rng.gen_range(1..12), rng.gen_range(1..12));
    check_network(&[i], &[LayerSpec::Dense { input: i, output: o }], rng.gen_range(1..5), seed)
}

pub fn conv_case(seed: u64) -> CheckStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc);
    let in_channels = rng.gen_range(1..4);
    let kernel = rng.gen_range(1..4);
    let stride = rng.gen_range(1..3);
    let side = kernel + rng.gen_range(0..5);
    let spec = LayerSpec::Conv {
        in_channels,
        out_channels: rng.gen_range(1..4),
        kernel,
        stride,
    };
    check_network(&[in_channels, side, side + rng.gen_range(0..2)], &[spec], rng.gen_range(1..3), seed)
}

/// Activation behind a dense layer so the check also covers its input
/// gradient through a parametric layer.
pub fn activation_case(act: LayerSpec, seed: u64) -> CheckStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa);
    let (i, o) = (rng.gen_range(1..10), rng.gen_range(1..10));
    check_network(&[i], &[LayerSpec::Dense { input: i, output: o }, act], rng.gen_range(1..5), seed)
}

fn net_shape(encoder: EncoderKind, rng: &mut ChaCha8Rng) -> NetShape {
    let obs_shape = match encoder {
        EncoderKind::Mlp => [rng.gen_range(1..3), rng.gen_range(2..5), rng.gen_range(2..5)],
        EncoderKind::Conv => [rng.gen_range(1..3), 15, 15],
    };
    NetShape {
        obs_shape,
        action_dim: rng.gen_range(1..4),
        encoder,
        hidden: rng.gen_range(2..10),
        depth: rng.gen_range(1..4),
    }
}

/// Actor: `L = Σ c ⊙ A(s)` (including the `[0,1]` squash) for parameters.
pub fn actor_case(encoder: EncoderKind, seed: u64) -> CheckStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xac);
    let shape = net_shape(encoder, &mut rng);
    let mut actor = Actor::new(&shape, &mut rng).unwrap();
    let batch = rng.gen_range(1..4);
    let obs = shape
        .obs_batch(batch, (0..batch * shape.obs_len()).map(|_| rng.gen_range(0.0..1.0)).collect())
        .unwrap();
    let a = actor.forward(&obs).unwrap();
    let c = random_tensor(a.shape(), &mut rng);
    let grads = actor.backward(&c).unwrap();
    let loss = |actor: &Actor| -> f64 {
        let y = actor.infer(&obs).unwrap();
        y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
    };
    let mut errs = Vec::new();
    for p in 0..actor.net.params().count() {
        let len = actor.net.params().nth(p).unwrap().len();
        for i in probe(len, 20, &mut rng) {
            let orig = actor.net.params().nth(p).unwrap().data()[i];
            actor.net.params_mut().nth(p).unwrap().data_mut()[i] = orig + H;
            let up = loss(&actor);
            actor.net.params_mut().nth(p).unwrap().data_mut()[i] = orig - H;
            let down = loss(&actor);
            actor.net.params_mut().nth(p).unwrap().data_mut()[i] = orig;
            errs.push(rel_err(grads.0[p].data()[i], (up - down) / (2.0 * H)));
        }
    }
    let mut s = CheckStats::default();
    s.absorb(&errs);
    s
}

/// Critic: `L = Σ c ⊙ Q(s, a)` for encoder and head parameters and for the
/// action input.
pub fn critic_case(encoder: EncoderKind, seed: u64) -> CheckStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xcc);
    let shape = net_shape(encoder, &mut rng);
    let mut q = QNet::new(&shape, &mut rng).unwrap();
    let batch = rng.gen_range(1..4);
    let obs = shape
        .obs_batch(batch, (0..batch * shape.obs_len()).map(|_| rng.gen_range(0.0..1.0)).collect())
        .unwrap();
    let actions = Tensor::new(
        &[batch, shape.action_dim],
        (0..batch * shape.action_dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let out = q.forward(&obs, &actions).unwrap();
    let c = random_tensor(out.shape(), &mut rng);
    let grads = q.backward_params(&c).unwrap();
    let da = q.action_gradient(&c).unwrap();
    let loss = |q: &QNet, actions: &Tensor| -> f64 {
        let y = q.infer(&obs, actions).unwrap();
        y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
    };

    let mut errs = Vec::new();
    // head parameters
    for p in 0..q.head.params().count() {
        let len = q.head.params().nth(p).unwrap().len();
        for i in probe(len, 15, &mut rng) {
            let orig = q.head.params().nth(p).unwrap().data()[i];
            q.head.params_mut().nth(p).unwrap().data_mut()[i] = orig + H;
            let up = loss(&q, &actions);
            q.head.params_mut().nth(p).unwrap().data_mut()[i] = orig - H;
            let down = loss(&q, &actions);
            q.head.params_mut().nth(p).unwrap().data_mut()[i] = orig;
            errs.push(rel_err(grads.head.0[p].data()[i], (up - down) / (2.0 * H)));
        }
    }
    if let Some(enc_grads) = &grads.encoder {
        let n = q.encoder.as_ref().unwrap().params().count();
        for p in 0..n {
            let len = q.encoder.as_ref().unwrap().params().nth(p).unwrap().len();
            for i in probe(len, 15, &mut rng) {
                let enc = q.encoder.as_mut().unwrap();
                let orig = enc.params().nth(p).unwrap().data()[i];
                enc.params_mut().nth(p).unwrap().data_mut()[i] = orig + H;
                let up = loss(&q, &actions);
                let enc = q.encoder.as_mut().unwrap();
                enc.params_mut().nth(p).unwrap().data_mut()[i] = orig - H;
                let down = loss(&q, &actions);
                q.encoder.as_mut().unwrap().params_mut().nth(p).unwrap().data_mut()[i] = orig;
                errs.push(rel_err(enc_grads.0[p].data()[i], (up - down) / (2.0 * H)));
            }
        }
    }
    for i in 0..actions.len() {
        let mut ap = actions.clone();
        ap.data_mut()[i] += H;
        let up = loss(&q, &ap);
        ap.data_mut()[i] -= 2.0 * H;
        let down = loss(&q, &ap);
        errs.push(rel_err(da.data()[i], (up - down) / (2.0 * H)));
    }
    let mut s = CheckStats::default();
    s.absorb(&errs);
    s
}

/// The full battery: 20 cases per layer kind and per composed network.
pub fn battery(cases_per_kind: u64) -> Vec<(&'static str, CheckStats)> {
    let mut out = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn(u64) -> CheckStats| {
        let mut total = CheckStats::default();
        for seed in 0..cases_per_kind {
            total.merge(f(seed));
        }
        out.push((name, total));
    };
    run("dense", &dense_case);
    run("conv", &conv_case);
    run("relu", &|s| activation_case(LayerSpec::Relu, s));
    run("tanh", &|s| activation_case(LayerSpec::Tanh, s));
    run("actor/mlp", &|s| actor_case(EncoderKind::Mlp, s));
    run("actor/conv", &|s| actor_case(EncoderKind::Conv, s));
    run("critic/mlp", &|s| critic_case(EncoderKind::Mlp, s));
    run("critic/conv", &|s| critic_case(EncoderKind::Conv, s));
    out
}
