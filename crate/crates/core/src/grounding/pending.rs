use std::collections::VecDeque;

use super::{align_to_steps, FeedbackStream, GroundingConfig, StepStamp};
use crate::error::Result;

/// Steps waiting for their feedback to arrive.
///
/// A step stamped at `t` is released once the session clock passes
/// `t + delay + tolerance`; after that no sample can change its reward, so
/// the grounded reward is final when the caller stores it.
#[derive(Clone, Debug)]
pub struct PendingSteps<T> {
    config: GroundingConfig,
    items: VecDeque<(StepStamp, T)>,
}

impl<T> PendingSteps<T> {
    pub fn new(config: GroundingConfig) -> Self {
        PendingSteps {
            config,
            items: VecDeque::new(),
        }
    }

    pub fn push(&mut self, stamp: StepStamp, item: T) {
        self.items.push_back((stamp, item));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Earliest clock time at which every pending step is final.
    pub fn settle_time(&self) -> Option<f64> {
        self.items
            .back()
            .map(|(s, _)| s.t_wall + self.config.delay + self.config.tolerance())
    }

    /// Releases every step whose feedback window closed at or before `now`,
    /// paired with its grounded feedback reward.
    pub fn drain_ready(&mut self, now: f64, stream: &mut FeedbackStream) -> Result<Vec<(StepStamp, T, f64)>> {
        let horizon = self.config.delay + self.config.tolerance();
        let n = self
            .items
            .iter()
            .take_while(|(s, _)| s.t_wall + horizon <= now)
            .count();
        self.release(n, stream)
    }

    pub fn drain_all(&mut self, stream: &mut FeedbackStream) -> Result<Vec<(StepStamp, T, f64)>> {
        self.release(self.items.len(), stream)
    }

    fn release(&mut self, n: usize, stream: &mut FeedbackStream) -> Result<Vec<(StepStamp, T, f64)>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let ready: Vec<(StepStamp, T)> = self.items.drain(..n).collect();
        let stamps: Vec<StepStamp> = ready.iter().map(|(s, _)| *s).collect();
        let rewards = align_to_steps(stream.as_slice(), &stamps, &self.config)?;
        // samples older than the earliest pending window can no longer match
        let keep_from = self
            .items
            .front()
            .map_or(stamps[n - 1].t_wall, |(s, _)| s.t_wall)
            + self.config.delay
            - self.config.tolerance();
        stream.discard_before(keep_from);
        Ok(ready
            .into_iter()
            .zip(rewards)
            .map(|((s, t), r)| (s, t, r))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::{FeedbackSample, FeedbackSource};

    fn stamp(step: usize, t: f64) -> StepStamp {
        StepStamp {
            episode: 0,
            step,
            t_wall: t,
        }
    }

    #[test]
    fn releases_only_settled_steps() {
        let mut p = PendingSteps::new(GroundingConfig::default());
        let mut stream = FeedbackStream::new();
        for i in 0..4 {
            p.push(stamp(i, i as f64), i);
            stream.push(FeedbackSample::new(i as f64 + 1.0, 0.1 * i as f64, FeedbackSource::Scripted));
        }
        // delay 1, tolerance 0.5: step at t is final at t + 1.5
        let ready = p.drain_ready(2.5, &mut stream).unwrap();
        assert_eq!(ready.iter().map(|r| r.1).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(ready[1].2, 0.1);
        let rest = p.drain_all(&mut stream).unwrap();
        assert_eq!(rest.iter().map(|r| r.2).collect::<Vec<_>>(), vec![0.2, 0.30000000000000004]);
        assert!(p.is_empty());
    }
}
