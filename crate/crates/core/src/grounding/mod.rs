//! Feedback grounding: turning timestamped feedback into per-step rewards.
//!
//! Two schemes are provided. The dense scheme shifts the feedback stream
//! back by a constant human delay and gives every decision step the sample
//! nearest to `t + delay`. The window scheme credits each discrete feedback
//! event uniformly to the steps that happened `[lo, hi]` seconds before it.

mod log;
mod pending;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use log::{read_feedback_log, FeedbackLog};
pub use pending::PendingSteps;

use crate::envs::TaskId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    Human,
    Scripted,
    Simulated,
}

impl fmt::Display for FeedbackSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackSource::Human => "human",
            FeedbackSource::Scripted => "scripted",
            FeedbackSource::Simulated => "simulated",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSample {
    /// Seconds since session start, on the session clock.
    pub t_wall: f64,
    pub value: f64,
    pub source: FeedbackSource,
}

impl FeedbackSample {
    /// Clamps `value` into `[-1, 1]` and `t_wall` to be nonnegative.
    pub fn new(t_wall: f64, value: f64, source: FeedbackSource) -> Self {
        FeedbackSample {
            t_wall: t_wall.max(0.0),
            value: if value.is_nan() { 0.0 } else { value.clamp(-1.0, 1.0) },
            source,
        }
    }
}

/// Maps a continuous value onto the discrete `{-1, 0, +1}` feedback set by
/// rounding to the nearest element.
pub fn discretize(value: f64) -> f64 {
    // `+ 0.0` turns a rounded −0 into 0
    value.clamp(-1.0, 1.0).round() + 0.0
}

/// Time-ordered feedback samples. Pushing keeps the order even when a
/// perturbed source produces slightly out-of-order timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeedbackStream {
    samples: VecDeque<FeedbackSample>,
}

impl FeedbackStream {
    pub fn new() -> Self {
        FeedbackStream::default()
    }

    pub fn push(&mut self, sample: FeedbackSample) {
        let at = self.samples.partition_point(|s| s.t_wall <= sample.t_wall);
        self.samples.insert(at, sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &VecDeque<FeedbackSample> {
        &self.samples
    }

    pub fn as_slice(&mut self) -> &[FeedbackSample] {
        self.samples.make_contiguous()
    }

    pub fn to_vec(&self) -> Vec<FeedbackSample> {
        self.samples.iter().copied().collect()
    }

    /// Drops samples older than `t`; alignment never looks that far back.
    pub fn discard_before(&mut self, t: f64) {
        while self.samples.front().is_some_and(|s| s.t_wall < t) {
            self.samples.pop_front();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStamp {
    pub episode: u64,
    pub step: usize,
    pub t_wall: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingMode {
    GuideDense,
    TamerWindow,
}

impl FromStr for GroundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "guide_dense" => Ok(GroundingMode::GuideDense),
            "tamer_window" => Ok(GroundingMode::TamerWindow),
            other => Err(Error::Config(format!("unknown grounding mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundingConfig {
    /// Assumed human reaction delay in seconds.
    pub delay: f64,
    pub mode: GroundingMode,
    pub window_lo: f64,
    pub window_hi: f64,
    /// Scale applied to the feedback reward before adding the env reward.
    pub alpha: f64,
    /// Reward used for steps with no matching sample.
    pub neutral: f64,
    /// Reuse the previous step's feedback instead of `neutral` when a step
    /// has no matching sample.
    pub carry_forward: bool,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig::for_task(TaskId::FindTreasure)
    }
}

impl GroundingConfig {
    pub fn for_task(task: TaskId) -> Self {
        let (delay, window_hi) = match task {
            TaskId::Bowling => (2.0, 4.0),
            _ => (1.0, 1.0),
        };
        GroundingConfig {
            delay,
            mode: GroundingMode::GuideDense,
            window_lo: 0.2,
            window_hi,
            alpha: 1.0,
            neutral: 0.0,
            carry_forward: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay >= 0.0) {
            return Err(Error::Config("delay must be nonnegative".into()));
        }
        if !(0.0 < self.window_lo && self.window_lo < self.window_hi) {
            return Err(Error::Config("window needs 0 < lo < hi".into()));
        }
        Ok(())
    }

    /// Matching tolerance around `t + delay`.
    pub fn tolerance(&self) -> f64 {
        self.delay / 2.0
    }
}

/// Index of the sample nearest to `target` within `tolerance`; the earlier
/// sample wins a tie. `samples` must be sorted by time.
fn nearest_sample<'a, I>(samples: I, target: f64, tolerance: f64) -> Option<FeedbackSample>
where
    I: IntoIterator<Item = &'a FeedbackSample>,
{
    let mut best: Option<(f64, FeedbackSample)> = None;
    for s in samples {
        let gap = (s.t_wall - target).abs();
        if s.t_wall > target + tolerance {
            break;
        }
        if gap <= tolerance && best.map_or(true, |(g, _)| gap < g) {
            best = Some((gap, *s));
        }
    }
    best.map(|(_, s)| s)
}

/// Per-step feedback reward: the value of the sample nearest to
/// `t_step + delay` within `delay / 2`, else the neutral default (or the
/// previous step's value with `carry_forward`).
pub fn align_to_steps(
    samples: &[FeedbackSample],
    stamps: &[StepStamp],
    config: &GroundingConfig,
) -> Result<Vec<f64>> {
    if stamps.windows(2).any(|w| w[1].t_wall < w[0].t_wall) {
        return Err(Error::Usage("step stamps must be sorted by time".into()));
    }
    let mut sorted;
    let samples = if samples.windows(2).all(|w| w[0].t_wall <= w[1].t_wall) {
        samples
    } else {
        sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.t_wall.total_cmp(&b.t_wall));
        &sorted[..]
    };
    let tol = config.tolerance();
    let mut out = Vec::with_capacity(stamps.len());
    let mut prev = config.neutral;
    for stamp in stamps {
        let target = stamp.t_wall + config.delay;
        let lo = samples.partition_point(|s| s.t_wall < target - tol);
        let r = match nearest_sample(&samples[lo..], target, tol) {
            Some(s) => s.value,
            None if config.carry_forward => prev,
            None => config.neutral,
        };
        prev = r;
        out.push(r);
    }
    Ok(out)
}

/// `alpha · r_hf + r_env`.
pub fn combine(r_hf: f64, r_env: f64, alpha: f64) -> f64 {
    alpha * r_hf + r_env
}

/// Steps credited by a feedback event at `t_feedback`: all stamps with
/// `t_feedback − t_step ∈ [lo, hi]`, each weighted `1 / count`. Returns
/// indices into `stamps`.
pub fn tamer_window_pairs(t_feedback: f64, stamps: &[StepStamp], lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let picked: Vec<usize> = stamps
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            let lag = t_feedback - s.t_wall;
            lag >= lo && lag <= hi
        })
        .map(|(i, _)| i)
        .collect();
    let w = 1.0 / picked.len().max(1) as f64;
    picked.into_iter().map(|i| (i, w)).collect()
}
