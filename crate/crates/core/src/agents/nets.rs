//! Actor and state-action value networks built from the sequential kernel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    clip_global_norm, conv_encoder_output, conv_encoder_specs, mlp_specs, AdamConfig, AdamState,
    Checkpoint, Gradients, LayerSpec, Network, Tensor,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Flattened observation through one dense relu layer of `hidden` units.
    Mlp,
    /// Three strided conv layers, then the dense stack.
    Conv,
}

/// Network sizes shared by every network of an agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    pub obs_shape: [usize; 3],
    pub action_dim: usize,
    pub encoder: EncoderKind,
    pub hidden: usize,
    /// Dense layers after the encoder.
    pub depth: usize,
}

impl NetShape {
    pub fn obs_len(&self) -> usize {
        self.obs_shape.iter().product()
    }

    fn obs_input_shape(&self) -> Vec<usize> {
        match self.encoder {
            EncoderKind::Mlp => vec![self.obs_len()],
            EncoderKind::Conv => self.obs_shape.to_vec(),
        }
    }

    fn encoder_specs(&self) -> Vec<LayerSpec> {
        match self.encoder {
            EncoderKind::Mlp => vec![
                LayerSpec::Dense {
                    input: self.obs_len(),
                    output: self.hidden,
                },
                LayerSpec::Relu,
            ],
            EncoderKind::Conv => conv_encoder_specs(self.obs_shape[0]),
        }
    }

    fn encoded_len(&self) -> usize {
        match self.encoder {
            EncoderKind::Mlp => self.hidden,
            EncoderKind::Conv => {
                let [_, h, w] = self.obs_shape;
                conv_encoder_output(h.min(w))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.encoder == EncoderKind::Conv {
            let [_, h, w] = self.obs_shape;
            if h != w || h < 15 {
                return Err(Error::Config(format!(
                    "conv encoder needs a square observation of side ≥ 15, got {h}×{w}"
                )));
            }
        }
        if self.action_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("action_dim and hidden must be positive".into()));
        }
        Ok(())
    }

    /// Batch tensor for this shape's observation input.
    pub fn obs_batch(&self, rows: usize, data: Vec<f64>) -> Result<Tensor> {
        let mut shape = vec![rows];
        shape.extend(self.obs_input_shape());
        Tensor::new(&shape, data)
    }
}

/// Maps the actor's tanh output onto `[0, 1]`.
pub fn squash(y: f64) -> f64 {
    0.5 * (y + 1.0)
}

/// Deterministic policy `A_θ(s)` with outputs in `[0, 1]^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub net: Network,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(shape: &NetShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let mut specs = shape.encoder_specs();
        specs.extend(mlp_specs(shape.encoded_len(), shape.hidden, shape.action_dim, shape.depth));
        specs.push(LayerSpec::Tanh);
        Ok(Actor {
            net: Network::new(&shape.obs_input_shape(), &specs, rng)?,
        })
    }

    /// Actions for a batch of observations, without caching.
    pub fn infer(&self, obs: &Tensor) -> Result<Tensor> {
        let mut y = self.net.infer(obs)?;
        y.data_mut().iter_mut().for_each(|v| *v = squash(*v));
        Ok(y)
    }

    pub fn forward(&mut self, obs: &Tensor) -> Result<Tensor> {
        let mut y = self.net.forward(obs)?;
        y.data_mut().iter_mut().for_each(|v| *v = squash(*v));
        Ok(y)
    }

    /// Parameter gradients given `∂L/∂a` for the last `forward` batch.
    pub fn backward(&self, action_grad: &Tensor) -> Result<Gradients> {
        let mut g = action_grad.clone();
        g.scale(0.5);
        self.net.backward_params(&g)
    }
}

/// Scalar state-action network: `Q_ψ(s, a)` for DDPG or the feedback
/// estimator `F_φ(s, a)` for TAMER. The action joins the dense stack at
/// its input, after the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct QNet {
    pub encoder: Option<Network>,
    pub head: Network,
    action_dim: usize,
    /// Features from the last `forward`, needed to split the head's input
    /// gradient.
    features: Option<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QGrads {
    pub encoder: Option<Gradients>,
    pub head: Gradients,
}

impl QGrads {
    pub fn global_norm(&self) -> f64 {
        let e = self.encoder.as_ref().map_or(0.0, |g| g.global_norm().powi(2));
        (e + self.head.global_norm().powi(2)).sqrt()
    }

    /// Joint global-norm clipping; returns the pre-clip norm.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            // clipping both parts to max·(part/total) keeps the joint norm at max
            let s = max_norm / norm;
            if let Some(e) = &mut self.encoder {
                e.iter_mut().for_each(|t| t.scale(s));
            }
            self.head.iter_mut().for_each(|t| t.scale(s));
        }
        norm
    }
}

impl QNet {
    pub fn new<R: Rng + ?Sized>(shape: &NetShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let encoder = Some(Network::new(&shape.obs_input_shape(), &shape.encoder_specs(), rng)?);
        let input = shape.encoded_len() + shape.action_dim;
        let head = Network::new(&[input], &mlp_specs(input, shape.hidden, 1, shape.depth), rng)?;
        Ok(QNet {
            encoder,
            head,
            action_dim: shape.action_dim,
            features: None,
        })
    }

    pub fn from_parts(encoder: Option<Network>, head: Network, action_dim: usize) -> Self {
        QNet {
            encoder,
            head,
            action_dim,
            features: None,
        }
    }

    fn joined(features: &Tensor, actions: &Tensor) -> Result<Tensor> {
        let b = features.batch();
        if actions.batch() != b {
            return Err(Error::shape(&[b], &[actions.batch()]));
        }
        let (fl, al) = (features.sample_len(), actions.sample_len());
        let mut data = Vec::with_capacity(b * (fl + al));
        for i in 0..b {
            data.extend_from_slice(features.row(i));
            data.extend_from_slice(actions.row(i));
        }
        Tensor::new(&[b, fl + al], data)
    }

    fn flat(t: &Tensor) -> Result<Tensor> {
        t.clone().reshape(&[t.batch(), t.sample_len()])
    }

    pub fn infer(&self, obs: &Tensor, actions: &Tensor) -> Result<Tensor> {
        let features = match &self.encoder {
            Some(e) => Self::flat(&e.infer(obs)?)?,
            None => Self::flat(obs)?,
        };
        self.head.infer(&Self::joined(&features, actions)?)
    }

    pub fn forward(&mut self, obs: &Tensor, actions: &Tensor) -> Result<Tensor> {
        let features = match &mut self.encoder {
            Some(e) => Self::flat(&e.forward(obs)?)?,
            None => Self::flat(obs)?,
        };
        let out = self.head.forward(&Self::joined(&features, actions)?)?;
        self.features = Some(features);
        Ok(out)
    }

    fn split_input_grad(&self, dx: &Tensor) -> Result<(Tensor, Tensor)> {
        let b = dx.batch();
        let k = self.action_dim;
        let fl = dx.sample_len() - k;
        let mut df = Vec::with_capacity(b * fl);
        let mut da = Vec::with_capacity(b * k);
        for i in 0..b {
            let row = dx.row(i);
            df.extend_from_slice(&row[..fl]);
            da.extend_from_slice(&row[fl..]);
        }
        Ok((Tensor::new(&[b, fl], df)?, Tensor::new(&[b, k], da)?))
    }

    /// Parameter gradients for the last `forward` batch.
    pub fn backward_params(&self, out_grad: &Tensor) -> Result<QGrads> {
        match &self.encoder {
            None => Ok(QGrads {
                encoder: None,
                head: self.head.backward_params(out_grad)?,
            }),
            Some(e) => {
                let (head, dx) = self.head.backward(out_grad)?;
                let (df, _) = self.split_input_grad(&dx)?;
                let df = df.reshape(&[dx.batch(), e.output_len()])?;
                Ok(QGrads {
                    encoder: Some(e.backward_params(&df)?),
                    head,
                })
            }
        }
    }

    /// `∂out/∂a` for the last `forward` batch; no parameter gradients.
    pub fn action_gradient(&self, out_grad: &Tensor) -> Result<Tensor> {
        if self.features.is_none() {
            return Err(Error::Usage("backward called before forward".into()));
        }
        let dx = self.head.input_gradient(out_grad)?;
        Ok(self.split_input_grad(&dx)?.1)
    }

    pub fn networks(&self) -> impl Iterator<Item = &Network> {
        self.encoder.iter().chain(std::iter::once(&self.head))
    }

    pub fn fingerprint(&self) -> u64 {
        self.networks()
            .fold(0xcbf2_9ce4_8422_2325, |h, n| h.rotate_left(17) ^ n.fingerprint())
    }

    pub fn snapshot(&self) -> QNet {
        QNet {
            encoder: self.encoder.as_ref().map(Network::snapshot),
            head: self.head.snapshot(),
            action_dim: self.action_dim,
            features: None,
        }
    }

    pub fn soft_update_from(&mut self, online: &QNet, tau: f64) -> Result<()> {
        if let (Some(t), Some(o)) = (&mut self.encoder, &online.encoder) {
            crate::nn::soft_update(t, o, tau)?;
        }
        crate::nn::soft_update(&mut self.head, &online.head, tau)
    }

    pub fn store(&self, ckpt: &mut Checkpoint, name: &str) {
        if let Some(e) = &self.encoder {
            ckpt.networks.push((format!("{name}.encoder"), e.snapshot()));
        }
        ckpt.networks.push((format!("{name}.head"), self.head.snapshot()));
    }

    pub fn load(ckpt: &Checkpoint, name: &str, action_dim: usize) -> Result<Self> {
        let encoder = ckpt.network(&format!("{name}.encoder")).ok().cloned();
        let head = ckpt.network(&format!("{name}.head"))?.clone();
        Ok(QNet::from_parts(encoder, head, action_dim))
    }
}

/// Adam state(s) matching a [`QNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct QOptim {
    pub encoder: Option<AdamState>,
    pub head: AdamState,
}

impl QOptim {
    pub fn new(q: &QNet, config: AdamConfig) -> Self {
        QOptim {
            encoder: q.encoder.as_ref().map(|e| AdamState::new(e, config)),
            head: AdamState::new(&q.head, config),
        }
    }

    pub fn step(&mut self, q: &mut QNet, grads: &QGrads, lr: f64) -> Result<()> {
        if let (Some(opt), Some(net), Some(g)) = (&mut self.encoder, &mut q.encoder, &grads.encoder) {
            opt.step(net, g, lr)?;
        }
        self.head.step(&mut q.head, &grads.head, lr)
    }

    pub fn store(&self, ckpt: &mut Checkpoint, name: &str) {
        if let Some(e) = &self.encoder {
            ckpt.optimizers.push((format!("{name}.encoder"), e.clone()));
        }
        ckpt.optimizers.push((format!("{name}.head"), self.head.clone()));
    }

    pub fn load(ckpt: &Checkpoint, name: &str) -> Result<Self> {
        Ok(QOptim {
            encoder: ckpt.optimizer(&format!("{name}.encoder")).ok().cloned(),
            head: ckpt.optimizer(&format!("{name}.head"))?.clone(),
        })
    }
}

/// Clips and applies actor gradients; returns the pre-clip norm.
pub fn apply_clipped(
    net: &mut Network,
    opt: &mut AdamState,
    mut grads: Gradients,
    clip: f64,
    lr: f64,
) -> Result<f64> {
    let norm = clip_global_norm(&mut grads, clip);
    opt.step(net, &grads, lr)?;
    Ok(norm)
}
