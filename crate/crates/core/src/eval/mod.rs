//! Evaluation harness and analysis: success rate / score on held-out
//! layouts, exploration curves, milestone matrices and CSV reports.

mod analyze;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use analyze::{analyze, last_evaluation, milestone_thresholds, Analysis};
pub use report::{
    read_metrics, write_exploration_curve, write_learning_curve, write_milestones, MetricRecord,
    Phase,
};

use crate::agents::Policy;
use crate::envs::{make_env, task_dims, EnvConfig, Observation, TaskId};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

/// Layout seeds at or above this value are reserved for evaluation;
/// training episodes draw their layouts strictly below it.
pub const EVAL_SEED_BASE: u64 = 10_000;

/// Layout seed of evaluation episode `i` for evaluation seed `seed`.
pub fn eval_layout_seed(seed: u64, i: usize) -> u64 {
    let span = u64::MAX - EVAL_SEED_BASE;
    EVAL_SEED_BASE + seed.wrapping_mul(1_000_003).wrapping_add(i as u64) % span
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task: TaskId,
    pub checkpoint: Option<String>,
    pub episodes: usize,
    /// Navigation only.
    pub success_rate: Option<f64>,
    /// Bowling only: mean game score.
    pub score: Option<f64>,
    pub returns: Vec<f64>,
    /// Per episode, the visible-area ratio after reset and after each step.
    pub visible_ratios: Vec<Vec<f64>>,
}

impl EvalResult {
    /// The headline metric: `success_rate` for navigation, `score` for Bowling.
    pub fn metric(&self) -> (&'static str, f64) {
        match (self.success_rate, self.score) {
            (Some(s), _) => ("success_rate", s),
            (None, Some(s)) => ("score", s),
            (None, None) => ("score", 0.0),
        }
    }
}

/// Runs `episodes` evaluation episodes with `act` choosing actions.
pub fn evaluate_with<F>(task: TaskId, config: &EnvConfig, episodes: usize, seed: u64, mut act: F) -> Result<EvalResult>
where
    F: FnMut(&Observation) -> Result<Vec<f64>>,
{
    let mut env = make_env(task, config.clone())?;
    let mut returns = Vec::with_capacity(episodes);
    let mut ratios = Vec::new();
    let mut successes = 0;
    for i in 0..episodes {
        let mut obs = env.reset(eval_layout_seed(seed, i))?;
        let mut total = 0.0;
        let mut curve = vec![env.info_snapshot().visible_ratio];
        let mut success = false;
        while !env.is_done() {
            let step = env.step(&act(&obs)?)?;
            total += step.reward;
            curve.push(step.info.visible_ratio);
            success = step.info.success;
            obs = step.observation;
        }
        successes += success as usize;
        returns.push(total);
        if task.is_navigation() {
            ratios.push(curve);
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let nav = task.is_navigation();
    Ok(EvalResult {
        task,
        checkpoint: None,
        episodes,
        success_rate: nav.then(|| if episodes == 0 { 0.0 } else { successes as f64 / episodes as f64 }),
        score: (!nav).then(|| mean(&returns)),
        returns,
        visible_ratios: ratios,
    })
}

/// Deterministic evaluation of a policy snapshot.
pub fn evaluate_policy(policy: &Policy, task: TaskId, config: &EnvConfig, episodes: usize, seed: u64) -> Result<EvalResult> {
    let (obs_shape, action_dim) = task_dims(task, config);
    if policy.shape.obs_shape != obs_shape || policy.shape.action_dim != action_dim {
        return Err(Error::Config(format!(
            "policy expects {:?}/{} but {task} provides {:?}/{}",
            policy.shape.obs_shape, policy.shape.action_dim, obs_shape, action_dim
        )));
    }
    evaluate_with(task, config, episodes, seed, |obs| policy.act(&obs.data))
}

/// Loads an agent checkpoint and evaluates its actor on the task and
/// environment settings recorded in the checkpoint. The file is only read.
pub fn evaluate_checkpoint(path: &Path, episodes: usize, seed: u64) -> Result<EvalResult> {
    let ckpt = Checkpoint::load(path)?;
    let task: TaskId = serde_json::from_value(ckpt.metadata["env"].clone())
        .map_err(|e| Error::Checkpoint(format!("checkpoint has no env id: {e}")))?;
    let config: EnvConfig = match ckpt.metadata.get("env_config") {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| Error::Checkpoint(format!("bad env config: {e}")))?,
        None => EnvConfig::default(),
    };
    let policy = Policy::from_checkpoint(&ckpt)?;
    let mut result = evaluate_policy(&policy, task, &config, episodes, seed)?;
    result.checkpoint = Some(path.display().to_string());
    Ok(result)
}

/// Mean visible ratio at each step index across all episodes of all
/// results; shorter episodes carry their final ratio forward.
pub fn exploration_curve(results: &[EvalResult]) -> Result<Vec<f64>> {
    let episodes: Vec<&Vec<f64>> = results
        .iter()
        .flat_map(|r| &r.visible_ratios)
        .filter(|c| !c.is_empty())
        .collect();
    if episodes.is_empty() {
        return Err(Error::Usage("exploration curve needs navigation episodes".into()));
    }
    let len = episodes.iter().map(|c| c.len()).max().expect("nonempty");
    Ok((0..len)
        .map(|i| {
            let sum: f64 = episodes
                .iter()
                .map(|c| c[i.min(c.len() - 1)])
                .sum();
            sum / episodes.len() as f64
        })
        .collect())
}

/// Fraction of runs whose best metric up to each time point reaches each
/// threshold. `runs` holds `(time, value)` series; the result is indexed
/// `[threshold][time]`.
pub fn milestone_curve(runs: &[Vec<(f64, f64)>], thresholds: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if runs.is_empty() {
        return Err(Error::Usage("milestone curve needs at least one run".into()));
    }
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Usage("milestone thresholds must be sorted".into()));
    }
    let best_by = |run: &Vec<(f64, f64)>, t: f64| {
        run.iter()
            .filter(|(time, _)| *time <= t)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(thresholds
        .iter()
        .map(|&th| {
            times
                .iter()
                .map(|&t| {
                    let reached = runs
                        .iter()
                        .filter(|r| {
                            let best = best_by(r, t);
                            // no evaluation yet still counts for a zero threshold
                            best >= th || (th <= 0.0 && best == f64::NEG_INFINITY)
                        })
                        .count();
                    reached as f64 / runs.len() as f64
                })
                .collect()
        })
        .collect())
}
