use std::collections::VecDeque;

use serde_json::json;

use super::nets::{apply_clipped, Actor, NetShape, QNet, QOptim};
use super::replay::{ReplayBuffer, Transition};
use super::{action_tensor, metadata_field, obs_tensor, AgentConfig, Explorer, Policy};
use crate::error::Result;
use crate::nn::{mse, AdamState, Checkpoint, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean `Q(s, A(s))` over the actor batch.
    pub actor_objective: f64,
    pub updates: usize,
}

/// Deep deterministic policy gradient with target networks, uniform replay
/// and optional n-step returns.
#[derive(Clone, Debug)]
pub struct Ddpg {
    config: AgentConfig,
    shape: NetShape,
    pub actor: Actor,
    pub actor_target: Actor,
    pub critic: QNet,
    pub critic_target: QNet,
    actor_opt: AdamState,
    critic_opt: QOptim,
    replay: ReplayBuffer,
    explorer: Explorer,
    pending: VecDeque<Transition>,
    updates: u64,
}

impl Ddpg {
    pub fn new(shape: NetShape, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut explorer = Explorer::new(seed);
        let actor = Actor::new(&shape, &mut explorer.rng)?;
        let critic = QNet::new(&shape, &mut explorer.rng)?;
        Ok(Ddpg {
            actor_opt: AdamState::new(&actor.net, config.adam(config.actor_lr)),
            critic_opt: QOptim::new(&critic, config.adam(config.critic_lr)),
            actor_target: actor.clone(),
            critic_target: critic.snapshot(),
            actor,
            critic,
            replay: ReplayBuffer::new(config.buffer_capacity),
            explorer,
            pending: VecDeque::new(),
            updates: 0,
            config,
            shape,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
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

    /// Stores one decision step, then runs `updates_per_step` critic and
    /// actor updates once the buffer holds `warmup` transitions.
    pub fn observe(&mut self, transition: Transition) -> Result<Option<UpdateStats>> {
        for t in self.fold_n_step(transition) {
            self.replay.push(t);
        }
        if self.replay.len() < self.config.warmup.max(1) {
            return Ok(None);
        }
        let mut stats = UpdateStats::default();
        for _ in 0..self.config.updates_per_step {
            let batch: Vec<Transition> = self
                .replay
                .sample(self.config.batch_size, &mut self.explorer.rng)
                .into_iter()
                .cloned()
                .collect();
            stats.critic_loss = self.critic_update(&batch)?;
            stats.actor_objective = self.actor_update(&batch)?;
            self.update_targets()?;
            stats.updates += 1;
        }
        Ok(Some(stats))
    }

    fn fold_n_step(&mut self, t: Transition) -> Vec<Transition> {
        let n = self.config.n_step;
        if n == 1 {
            return vec![t];
        }
        let done = t.done;
        self.pending.push_back(t);
        let mut out = Vec::new();
        if self.pending.len() == n {
            out.push(self.fold_pending());
            self.pending.pop_front();
        }
        if done {
            while !self.pending.is_empty() {
                out.push(self.fold_pending());
                self.pending.pop_front();
            }
        }
        out
    }

    fn fold_pending(&self) -> Transition {
        let first = self.pending.front().expect("nonempty");
        let last = self.pending.back().expect("nonempty");
        let reward = self
            .pending
            .iter()
            .rev()
            .fold(0.0, |acc, t| t.reward + self.config.gamma * acc);
        Transition {
            obs: first.obs.clone(),
            action: first.action.clone(),
            reward,
            next_obs: last.next_obs.clone(),
            done: last.done,
            n_steps: self.pending.len() as u32,
        }
    }

    /// Bootstrapped targets `y = r + γⁿ (1 − done) Q'(s', A'(s'))`, computed
    /// from the target networks only.
    pub fn critic_targets(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let next = obs_tensor(&self.shape, batch.iter().map(|t| &t.next_obs[..]))?;
        let next_a = self.actor_target.infer(&next)?;
        let q_next = self.critic_target.infer(&next, &next_a)?;
        Ok(batch
            .iter()
            .zip(q_next.data())
            .map(|(t, &q)| {
                let bootstrap = if t.done {
                    0.0
                } else {
                    self.config.gamma.powi(t.n_steps as i32) * q
                };
                t.reward + bootstrap
            })
            .collect())
    }

    /// One regression step of `Q(s, a)` toward the bootstrapped targets.
    /// Returns the pre-update loss; an empty batch is a no-op.
    pub fn critic_update(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let y = self.critic_targets(batch)?;
        let obs = obs_tensor(&self.shape, batch.iter().map(|t| &t.obs[..]))?;
        let act = action_tensor(self.shape.action_dim, batch.iter().map(|t| &t.action))?;
        let q = self.critic.forward(&obs, &act)?;
        let (loss, grad) = mse(&q, &y);
        let mut grads = self.critic.backward_params(&grad)?;
        grads.clip(self.config.grad_clip);
        self.critic_opt
            .step(&mut self.critic, &grads, self.config.critic_lr)?;
        Ok(loss)
    }

    /// One ascent step on `mean Q(s, A(s))` with the critic frozen.
    pub fn actor_update(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let obs = obs_tensor(&self.shape, batch.iter().map(|t| &t.obs[..]))?;
        let objective = actor_ascent(
            &mut self.actor,
            &mut self.actor_opt,
            &mut self.critic,
            &obs,
            &self.config,
        )?;
        self.updates += 1;
        Ok(objective)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        crate::nn::soft_update(&mut self.actor_target.net, &self.actor.net, self.config.tau)?;
        self.critic_target.soft_update_from(&self.critic, self.config.tau)
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
        ckpt.networks
            .push(("actor_target".into(), self.actor_target.net.snapshot()));
        self.critic.store(&mut ckpt, "critic");
        self.critic_target.store(&mut ckpt, "critic_target");
        ckpt.optimizers.push(("actor".into(), self.actor_opt.clone()));
        self.critic_opt.store(&mut ckpt, "critic");
        ckpt
    }

    /// Restores networks, optimizers and the exploration stream. The replay
    /// buffer is not part of a checkpoint and starts empty.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let shape: NetShape = metadata_field(ckpt, "shape")?;
        let config: AgentConfig = metadata_field(ckpt, "config")?;
        let k = shape.action_dim;
        Ok(Ddpg {
            actor: Actor {
                net: ckpt.network("actor")?.clone(),
            },
            actor_target: Actor {
                net: ckpt.network("actor_target")?.clone(),
            },
            critic: QNet::load(ckpt, "critic", k)?,
            critic_target: QNet::load(ckpt, "critic_target", k)?,
            actor_opt: ckpt.optimizer("actor")?.clone(),
            critic_opt: QOptim::load(ckpt, "critic")?,
            replay: ReplayBuffer::new(config.buffer_capacity),
            explorer: Explorer::from_state(&ckpt.metadata["rng"])?,
            pending: VecDeque::new(),
            updates: metadata_field(ckpt, "updates")?,
            config,
            shape,
        })
    }
}

/// Gradient ascent on `mean q(s, A(s))` for the actor. Only the actor's
/// parameters move; the value network is used for its action gradient.
pub(super) fn actor_ascent(
    actor: &mut Actor,
    opt: &mut crate::nn::AdamState,
    q: &mut QNet,
    obs: &Tensor,
    config: &AgentConfig,
) -> Result<f64> {
    let b = obs.batch();
    let a = actor.forward(obs)?;
    let values = q.forward(obs, &a)?;
    let objective = values.data().iter().sum::<f64>() / b as f64;
    // minimize −mean q + action_l2 · mean ‖2a − 1‖²
    let dq = Tensor::filled(&[b, 1], -1.0 / b as f64);
    let mut da = q.action_gradient(&dq)?;
    if config.action_l2 > 0.0 {
        for (g, a) in da.data_mut().iter_mut().zip(a.data()) {
            *g += config.action_l2 * 4.0 * (2.0 * a - 1.0) / b as f64;
        }
    }
    let grads = actor.backward(&da)?;
    apply_clipped(&mut actor.net, opt, grads, config.grad_clip, config.actor_lr)?;
    Ok(objective)
}
