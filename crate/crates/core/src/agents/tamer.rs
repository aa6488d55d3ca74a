use serde_json::json;

use super::ddpg::actor_ascent;
use super::nets::{Actor, NetShape, QNet, QOptim};
use super::replay::{TamerBuffer, TamerEntry};
use super::{action_tensor, metadata_field, obs_tensor, AgentConfig, Explorer, Policy};
use crate::error::{Error, Result};
use crate::nn::{weighted_mse, AdamState, Checkpoint};

/// Continuous Deep TAMER: an actor trained to maximize a learned feedback
/// estimator `F_φ(s, a)`, which in turn regresses the trainer's feedback.
/// Environment rewards never enter this agent.
#[derive(Clone, Debug)]
pub struct Tamer {
    config: AgentConfig,
    shape: NetShape,
    pub actor: Actor,
    pub estimator: QNet,
    actor_opt: AdamState,
    estimator_opt: QOptim,
    buffer: TamerBuffer,
    explorer: Explorer,
    updates: u64,
}

impl Tamer {
    pub fn new(shape: NetShape, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut explorer = Explorer::new(seed);
        let actor = Actor::new(&shape, &mut explorer.rng)?;
        let estimator = QNet::new(&shape, &mut explorer.rng)?;
        Ok(Tamer {
            actor_opt: AdamState::new(&actor.net, config.adam(config.actor_lr)),
            estimator_opt: QOptim::new(&estimator, config.adam(config.critic_lr)),
            actor,
            estimator,
            buffer: TamerBuffer::new(config.buffer_capacity),
            explorer,
            updates: 0,
            config,
            shape,
        })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn buffer(&self) -> &TamerBuffer {
        &self.buffer
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn act(&mut self, obs: &[f64], explore: bool) -> Result<Vec<f64>> {
        self.explorer
            .select(&self.actor, &self.shape, &self.config, obs, explore)
    }

    pub fn policy(&self) -> Policy {
        Policy {
            actor: Actor {
                net: self.actor.net.snapshot(),
            },
            shape: self.shape,
        }
    }

    /// Stores the credited pairs of one feedback event and trains on it.
    /// No event, no update.
    pub fn observe_feedback(&mut self, entries: Vec<TamerEntry>) -> Result<Option<(f64, f64)>> {
        if entries.is_empty() {
            return Ok(None);
        }
        for e in entries {
            if !(e.weight > 0.0) {
                return Err(Error::Usage("credit weights must be positive".into()));
            }
            self.buffer.push(e);
        }
        let mut last = (0.0, 0.0);
        for _ in 0..self.config.updates_per_feedback {
            let batch: Vec<TamerEntry> = self
                .buffer
                .sample(self.config.batch_size, &mut self.explorer.rng)
                .into_iter()
                .cloned()
                .collect();
            last = self.tamer_update(&batch)?;
        }
        Ok(Some(last))
    }

    /// One step on `L_φ = Σ w (F(s,a) − f)² / n`, then one on
    /// `L_θ = −mean F(s, A(s))`. Returns `(L_φ, mean F(s, A(s)))`.
    pub fn tamer_update(&mut self, batch: &[TamerEntry]) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Ok((0.0, 0.0));
        }
        let obs = obs_tensor(&self.shape, batch.iter().map(|e| &e.obs[..]))?;
        let act = action_tensor(self.shape.action_dim, batch.iter().map(|e| &e.action))?;
        let f: Vec<f64> = batch.iter().map(|e| e.feedback).collect();
        let w: Vec<f64> = batch.iter().map(|e| e.weight).collect();
        let pred = self.estimator.forward(&obs, &act)?;
        let (loss, grad) = weighted_mse(&pred, &f, Some(&w));
        let mut grads = self.estimator.backward_params(&grad)?;
        grads.clip(self.config.grad_clip);
        self.estimator_opt
            .step(&mut self.estimator, &grads, self.config.critic_lr)?;
        let objective = actor_ascent(
            &mut self.actor,
            &mut self.actor_opt,
            &mut self.estimator,
            &obs,
            &self.config,
        )?;
        self.updates += 1;
        Ok((loss, objective))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint {
            metadata: json!({
                "shape": self.shape,
                "config": self.config,
                "rng": self.explorer.rng_state(),
                "updates": self.updates,
            }),
            ..Checkpoint::default()
        };
        ckpt.networks.push(("actor".into(), self.actor.net.snapshot()));
        self.estimator.store(&mut ckpt, "estimator");
        ckpt.optimizers.push(("actor".into(), self.actor_opt.clone()));
        self.estimator_opt.store(&mut ckpt, "estimator");
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let shape: NetShape = metadata_field(ckpt, "shape")?;
        let config: AgentConfig = metadata_field(ckpt, "config")?;
        Ok(Tamer {
            actor: Actor {
                net: ckpt.network("actor")?.clone(),
            },
            estimator: QNet::load(ckpt, "estimator", shape.action_dim)?,
            actor_opt: ckpt.optimizer("actor")?.clone(),
            estimator_opt: QOptim::load(ckpt, "estimator")?,
            buffer: TamerBuffer::new(config.buffer_capacity),
            explorer: Explorer::from_state(&ckpt.metadata["rng"])?,
            updates: metadata_field(ckpt, "updates")?,
            config,
            shape,
        })
    }
}
