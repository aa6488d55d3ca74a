//! Learning agents: DDPG (the plain RL baseline and the GUIDE backbone) and
//! continuous Deep TAMER, whose critic is a learned feedback estimator.

mod ddpg;
mod nets;
mod replay;
mod tamer;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use ddpg::{Ddpg, UpdateStats};
pub use nets::{squash, Actor, EncoderKind, NetShape, QGrads, QNet, QOptim};
pub use replay::{share, ReplayBuffer, Ring, SharedObs, TamerBuffer, TamerEntry, Transition};
pub use tamer::Tamer;

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Checkpoint, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Ddpg,
    GuideDdpg,
    CDeepTamer,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Ddpg => "ddpg",
            AgentKind::GuideDdpg => "guide_ddpg",
            AgentKind::CDeepTamer => "c_deep_tamer",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(AgentKind::Ddpg),
            "guide_ddpg" | "guide" => Ok(AgentKind::GuideDdpg),
            "c_deep_tamer" | "tamer" => Ok(AgentKind::CDeepTamer),
            other => Err(Error::Config(format!("unknown agent kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub encoder: EncoderKind,
    pub hidden: usize,
    pub depth: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    /// Uniform random actions before the policy takes over; updates start
    /// once this many transitions are stored.
    pub warmup: usize,
    pub noise_std: f64,
    pub grad_clip: f64,
    pub buffer_capacity: usize,
    /// Gradient updates per environment decision step.
    pub updates_per_step: usize,
    pub n_step: usize,
    /// Gradient updates per feedback event (TAMER).
    pub updates_per_feedback: usize,
    /// Weight of the `‖2a − 1‖²` penalty in the actor objective; keeps the
    /// squashed outputs off their bounds, where the policy gradient vanishes.
    pub action_l2: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            encoder: EncoderKind::Mlp,
            hidden: 128,
            depth: 3,
            gamma: 0.99,
            tau: 0.01,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            batch_size: 64,
            warmup: 200,
            noise_std: 0.2,
            grad_clip: 1.0,
            buffer_capacity: 100_000,
            updates_per_step: 1,
            n_step: 1,
            updates_per_feedback: 1,
            action_l2: 0.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("depth", self.depth),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("n_step", self.n_step),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config("need gamma in [0, 1] and tau in (0, 1]".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.grad_clip > 0.0 && self.action_l2 >= 0.0) {
            return Err(Error::Config("noise_std ≥ 0, action_l2 ≥ 0 and grad_clip > 0 required".into()));
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

/// Exploration shared by both agents: uniform actions during warmup, then
/// the deterministic action plus clamped Gaussian noise.
#[derive(Clone, Debug)]
struct Explorer {
    rng: ChaCha8Rng,
    explore_steps: u64,
}

impl Explorer {
    fn new(seed: u64) -> Self {
        Explorer {
            rng: ChaCha8Rng::seed_from_u64(seed),
            explore_steps: 0,
        }
    }

    fn select(&mut self, actor: &Actor, shape: &NetShape, config: &AgentConfig, obs: &[f64], explore: bool) -> Result<Vec<f64>> {
        if explore {
            self.explore_steps += 1;
            if self.explore_steps <= config.warmup as u64 {
                return Ok((0..shape.action_dim).map(|_| self.rng.gen::<f64>()).collect());
            }
        }
        let mut a = actor.infer(&shape.obs_batch(1, obs.to_vec())?)?.into_data();
        if explore && config.noise_std > 0.0 {
            let noise = Normal::new(0.0, config.noise_std).expect("validated std");
            for v in &mut a {
                *v = (*v + noise.sample(&mut self.rng)).clamp(0.0, 1.0);
            }
        }
        Ok(a)
    }

    fn rng_state(&self) -> serde_json::Value {
        json!({
            "seed": self.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect::<String>(),
            "stream": self.rng.get_stream().to_string(),
            "word_pos": self.rng.get_word_pos().to_string(),
            "explore_steps": self.explore_steps,
        })
    }

    fn from_state(v: &serde_json::Value) -> Result<Self> {
        let bad = || Error::Checkpoint("malformed rng state".into());
        let hex = v["seed"].as_str().ok_or_else(bad)?;
        if hex.len() != 64 {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let stream: u64 = v["stream"].as_str().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let word_pos: u128 = v["word_pos"].as_str().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(Explorer {
            rng,
            explore_steps: v["explore_steps"].as_u64().ok_or_else(bad)?,
        })
    }
}

/// Copies the observation rows of `items` into one batch tensor.
fn obs_tensor<'a>(shape: &NetShape, rows: impl Iterator<Item = &'a [f32]>) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        data.extend(r.iter().map(|&v| v as f64));
        n += 1;
    }
    shape.obs_batch(n, data)
}

fn action_tensor<'a>(k: usize, rows: impl Iterator<Item = &'a Vec<f64>>) -> Result<Tensor> {
    let data: Vec<f64> = rows.flat_map(|r| r.iter().copied()).collect();
    Tensor::new(&[data.len() / k.max(1), k], data)
}

/// Deterministic actor snapshot used for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub actor: Actor,
    pub shape: NetShape,
}

impl Policy {
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor.infer(&self.shape.obs_batch(1, obs.to_vec())?)?.into_data())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let shape: NetShape = serde_json::from_value(ckpt.metadata["shape"].clone())
            .map_err(|e| Error::Checkpoint(format!("bad network shape metadata: {e}")))?;
        Ok(Policy {
            actor: Actor {
                net: ckpt.network("actor")?.clone(),
            },
            shape,
        })
    }
}

/// Any of the three agent variants behind one interface.
#[derive(Clone, Debug)]
pub enum Agent {
    Ddpg { kind: AgentKind, inner: Box<Ddpg> },
    Tamer(Box<Tamer>),
}

impl Agent {
    pub fn new(kind: AgentKind, shape: NetShape, config: AgentConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            AgentKind::Ddpg | AgentKind::GuideDdpg => Agent::Ddpg {
                kind,
                inner: Box::new(Ddpg::new(shape, config, seed)?),
            },
            AgentKind::CDeepTamer => Agent::Tamer(Box::new(Tamer::new(shape, config, seed)?)),
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Ddpg { kind, .. } => *kind,
            Agent::Tamer(_) => AgentKind::CDeepTamer,
        }
    }

    pub fn shape(&self) -> &NetShape {
        match self {
            Agent::Ddpg { inner, .. } => inner.shape(),
            Agent::Tamer(t) => t.shape(),
        }
    }

    pub fn act(&mut self, obs: &[f64], explore: bool) -> Result<Vec<f64>> {
        match self {
            Agent::Ddpg { inner, .. } => inner.act(obs, explore),
            Agent::Tamer(t) => t.act(obs, explore),
        }
    }

    pub fn policy(&self) -> Policy {
        match self {
            Agent::Ddpg { inner, .. } => inner.policy(),
            Agent::Tamer(t) => t.policy(),
        }
    }

    pub fn updates(&self) -> u64 {
        match self {
            Agent::Ddpg { inner, .. } => inner.updates(),
            Agent::Tamer(t) => t.updates(),
        }
    }

    /// Full training state; `extra` fields are merged into the metadata.
    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let mut ckpt = match self {
            Agent::Ddpg { inner, .. } => inner.to_checkpoint(),
            Agent::Tamer(t) => t.to_checkpoint(),
        };
        ckpt.metadata["kind"] = json!(self.kind());
        if let serde_json::Value::Object(map) = extra {
            for (k, v) in map {
                ckpt.metadata[k] = v;
            }
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let kind: AgentKind = serde_json::from_value(ckpt.metadata["kind"].clone())
            .map_err(|e| Error::Checkpoint(format!("bad agent kind: {e}")))?;
        Ok(match kind {
            AgentKind::CDeepTamer => Agent::Tamer(Box::new(Tamer::from_checkpoint(ckpt)?)),
            kind => Agent::Ddpg {
                kind,
                inner: Box::new(Ddpg::from_checkpoint(ckpt)?),
            },
        })
    }
}

fn metadata_field<T: serde::de::DeserializeOwned>(ckpt: &Checkpoint, key: &str) -> Result<T> {
    serde_json::from_value(ckpt.metadata[key].clone())
        .map_err(|e| Error::Checkpoint(format!("bad '{key}' metadata: {e}")))
}
