//! Heuristic feedback source standing in for a human trainer.
//!
//! Navigation feedback rewards exploration while the target is unseen and
//! proximity once it is visible; Bowling feedback scores each roll by its
//! pin count. A [`Perturbation`] optionally drops, blurs or jitters samples
//! to stress the grounding path the way a real trainer would.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envs::{StepInfo, TaskId};
use crate::error::{Error, Result};
use crate::grounding::{discretize, FeedbackSample, FeedbackSource};

/// Feedback while the target is unseen and the step revealed new cells.
pub const EXPLORE_BONUS: f64 = 0.5;
/// Feedback while the target is unseen and nothing new was revealed.
pub const IDLE_PENALTY: f64 = -0.1;

/// Navigation heuristic: a linear distance ramp from +1 (on the target) to
/// −1 (opposite corners) when the target is visible, otherwise an
/// exploration bonus or a small penalty.
pub fn scripted_feedback_nav(info: &StepInfo, grid_size: usize) -> f64 {
    match (info.target_visible, info.agent, info.target) {
        (true, Some(agent), Some(target)) => {
            let diag = (grid_size.saturating_sub(1) as f64) * std::f64::consts::SQRT_2;
            if diag == 0.0 {
                return 1.0;
            }
            (1.0 - 2.0 * agent.euclidean(target) / diag).clamp(-1.0, 1.0)
        }
        _ if info.newly_explored_cells > 0 => EXPLORE_BONUS,
        _ => IDLE_PENALTY,
    }
}

/// Bowling heuristic: `(pins − 5) / 5`.
pub fn scripted_feedback_bowling(pins: u32) -> f64 {
    ((pins as f64 - 5.0) / 5.0).clamp(-1.0, 1.0)
}

/// Heuristic value for any task, read from the step info.
pub fn scripted_value(task: TaskId, info: &StepInfo, grid_size: usize) -> f64 {
    match task {
        TaskId::Bowling => scripted_feedback_bowling(info.pins_knocked.unwrap_or(0)),
        _ => scripted_feedback_nav(info, grid_size),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedConfig {
    /// Standard deviation of additive Gaussian noise on the value.
    pub noise_std: f64,
    pub drop_prob: f64,
    /// Timestamps shift uniformly within `±delay_jitter` seconds.
    pub delay_jitter: f64,
    /// Round values to `{-1, 0, +1}` (button-style feedback).
    pub discrete: bool,
    pub seed: u64,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        ScriptedConfig {
            noise_std: 0.0,
            drop_prob: 0.0,
            delay_jitter: 0.0,
            discrete: false,
            seed: 0,
        }
    }
}

impl ScriptedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::Config("drop_prob must lie in [0, 1]".into()));
        }
        if !(self.noise_std >= 0.0) || !(self.delay_jitter >= 0.0) {
            return Err(Error::Config("noise_std and delay_jitter must be nonnegative".into()));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.noise_std == 0.0 && self.drop_prob == 0.0 && self.delay_jitter == 0.0
    }
}

/// Seeded sample perturbation: drop, then noise and clamp, then time shift.
#[derive(Clone, Debug)]
pub struct Perturbation {
    config: ScriptedConfig,
    rng: ChaCha8Rng,
}

impl Perturbation {
    pub fn new(config: ScriptedConfig) -> Result<Self> {
        config.validate()?;
        Ok(Perturbation {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn apply(&mut self, sample: FeedbackSample) -> Option<FeedbackSample> {
        let c = self.config;
        if c.is_identity() {
            return Some(sample);
        }
        if c.drop_prob > 0.0 && self.rng.gen_bool(c.drop_prob) {
            return None;
        }
        let mut value = sample.value;
        if c.noise_std > 0.0 {
            let noise = Normal::new(0.0, c.noise_std).expect("validated std");
            value += noise.sample(&mut self.rng);
        }
        let mut t = sample.t_wall;
        if c.delay_jitter > 0.0 {
            t += self.rng.gen_range(-c.delay_jitter..=c.delay_jitter);
        }
        Some(FeedbackSample::new(t, value, sample.source))
    }
}

/// Synthetic trainer: computes the heuristic for each decision step and
/// stamps it at `t_step + delay`, as a human reacting with that lag would.
#[derive(Clone, Debug)]
pub struct ScriptedTrainer {
    task: TaskId,
    grid_size: usize,
    delay: f64,
    discrete: bool,
    perturbation: Perturbation,
}

impl ScriptedTrainer {
    pub fn new(task: TaskId, grid_size: usize, delay: f64, config: ScriptedConfig) -> Result<Self> {
        Ok(ScriptedTrainer {
            task,
            grid_size,
            delay,
            discrete: config.discrete,
            perturbation: Perturbation::new(config)?,
        })
    }

    pub fn value(&self, info: &StepInfo) -> f64 {
        let v = scripted_value(self.task, info, self.grid_size);
        if self.discrete {
            discretize(v)
        } else {
            v
        }
    }

    pub fn feedback(&mut self, info: &StepInfo, t_step: f64) -> Option<FeedbackSample> {
        let sample = FeedbackSample::new(t_step + self.delay, self.value(info), FeedbackSource::Scripted);
        self.perturbation.apply(sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Cell;

    fn seen(agent: Cell, target: Cell) -> StepInfo {
        StepInfo {
            target_visible: true,
            agent: Some(agent),
            target: Some(target),
            ..StepInfo::default()
        }
    }

    #[test]
    fn navigation_examples() {
        let c = Cell::new(4, 4);
        assert_eq!(scripted_feedback_nav(&seen(c, c), 16), 1.0);
        let far = seen(Cell::new(0, 0), Cell::new(15, 15));
        assert!((scripted_feedback_nav(&far, 16) + 1.0).abs() < 1e-12);
        let explored = StepInfo {
            newly_explored_cells: 3,
            agent: Some(c),
            target: Some(Cell::new(12, 12)),
            ..StepInfo::default()
        };
        assert_eq!(scripted_feedback_nav(&explored, 16), 0.5);
        let idle = StepInfo {
            newly_explored_cells: 0,
            ..explored
        };
        assert_eq!(scripted_feedback_nav(&idle, 16), -0.1);
    }

    #[test]
    fn distance_ramp_is_strictly_decreasing() {
        let t = Cell::new(0, 0);
        let values: Vec<f64> = (0..16)
            .map(|x| scripted_feedback_nav(&seen(Cell::new(x, x / 2), t), 16))
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bowling_examples() {
        assert_eq!(scripted_feedback_bowling(10), 1.0);
        assert_eq!(scripted_feedback_bowling(0), -1.0);
        assert_eq!(scripted_feedback_bowling(5), 0.0);
    }

    #[test]
    fn identity_and_full_drop() {
        let s = FeedbackSample::new(3.0, 0.25, FeedbackSource::Scripted);
        let mut id = Perturbation::new(ScriptedConfig::default()).unwrap();
        assert_eq!(id.apply(s), Some(s));
        let mut drop = Perturbation::new(ScriptedConfig {
            drop_prob: 1.0,
            ..ScriptedConfig::default()
        })
        .unwrap();
        assert!((0..100).all(|_| drop.apply(s).is_none()));
    }

    #[test]
    fn noise_std_matches_config() {
        let mut p = Perturbation::new(ScriptedConfig {
            noise_std: 0.1,
            seed: 7,
            ..ScriptedConfig::default()
        })
        .unwrap();
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                p.apply(FeedbackSample::new(0.0, 0.0, FeedbackSource::Scripted))
                    .unwrap()
                    .value
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn jitter_stays_within_bound() {
        let mut p = Perturbation::new(ScriptedConfig {
            delay_jitter: 0.3,
            seed: 1,
            ..ScriptedConfig::default()
        })
        .unwrap();
        for _ in 0..1000 {
            let s = p.apply(FeedbackSample::new(5.0, 0.5, FeedbackSource::Scripted)).unwrap();
            assert!((s.t_wall - 5.0).abs() <= 0.3);
            assert_eq!(s.value, 0.5);
        }
    }

    #[test]
    fn trainer_stamps_at_step_plus_delay() {
        let mut t = ScriptedTrainer::new(TaskId::Bowling, 16, 2.0, ScriptedConfig::default()).unwrap();
        let info = StepInfo {
            pins_knocked: Some(3),
            ..StepInfo::default()
        };
        let s = t.feedback(&info, 6.0).unwrap();
        assert_eq!((s.t_wall, s.value), (8.0, -0.4));
        let mut d = ScriptedTrainer::new(
            TaskId::Bowling,
            16,
            2.0,
            ScriptedConfig {
                discrete: true,
                ..ScriptedConfig::default()
            },
        )
        .unwrap();
        assert_eq!(d.feedback(&info, 6.0).unwrap().value, 0.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        for c in [
            ScriptedConfig { drop_prob: 1.5, ..ScriptedConfig::default() },
            ScriptedConfig { noise_std: -0.1, ..ScriptedConfig::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
