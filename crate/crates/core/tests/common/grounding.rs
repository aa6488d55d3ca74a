//! Brute-force references for feedback grounding and the property suite
//! that compares the library against them.

use guide::grounding::{
    align_to_steps, combine, tamer_window_pairs, FeedbackSample, FeedbackSource, GroundingConfig, StepStamp,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// Times on a 1/8 s lattice keep every sum exact in f64.
fn lattice(ticks: u32) -> f64 {
    ticks as f64 / 8.0
}

pub fn stamps_at(times: &[f64]) -> Vec<StepStamp> {
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| StepStamp {
            episode: 0,
            step: i,
            t_wall: t,
        })
        .collect()
}

/// Nearest sample to `t + delay` within `delay / 2` by exhaustive search;
/// the earliest sample wins ties.
pub fn align_oracle(samples: &[FeedbackSample], stamps: &[StepStamp], cfg: &GroundingConfig) -> Vec<f64> {
    let tol = cfg.delay / 2.0;
    stamps
        .iter()
        .map(|st| {
            let target = st.t_wall + cfg.delay;
            let mut best: Option<(f64, f64, f64)> = None; // (gap, t, value)
            for s in samples {
                let gap = (s.t_wall - target).abs();
                if gap > tol {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((g, t, _)) => gap < g || (gap == g && s.t_wall < t),
                };
                if better {
                    best = Some((gap, s.t_wall, s.value));
                }
            }
            best.map_or(cfg.neutral, |(_, _, v)| v)
        })
        .collect()
}

pub fn window_oracle(t_feedback: f64, stamps: &[StepStamp], lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let mut idx = Vec::new();
    for (i, s) in stamps.iter().enumerate() {
        let lag = t_feedback - s.t_wall;
        if lo <= lag && lag <= hi {
            idx.push(i);
        }
    }
    let n = idx.len();
    idx.into_iter().map(|i| (i, 1.0 / n as f64)).collect()
}

fn sorted_times(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..2000, 1..max_len).prop_map(|mut v| {
        v.sort_unstable();
        v.into_iter().map(lattice).collect()
    })
}

fn delay() -> impl Strategy<Value = f64> {
    (0u32..=24).prop_map(lattice)
}

fn value() -> impl Strategy<Value = f64> {
    (-8i32..=8).prop_map(|v| v as f64 / 8.0)
}

/// Samples placed exactly `delay` after a random subset of well-separated
/// steps land on those steps and nowhere else.
fn prop_delay_shift(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (delay(), prop::collection::vec((1u32..40, any::<bool>(), value()), 1..40));
    runner
        .run(&strategy, |(d, steps)| {
            let cfg = GroundingConfig {
                delay: d,
                ..GroundingConfig::default()
            };
            // gaps of more than the delay keep every match unique
            let gap = d + 0.125;
            let mut t = 0.0;
            let mut times = Vec::new();
            let mut samples = Vec::new();
            let mut expected = Vec::new();
            for (extra, give, v) in steps {
                t += gap + lattice(extra);
                times.push(t);
                if give {
                    samples.push(FeedbackSample::new(t + d, v, FeedbackSource::Scripted));
                    expected.push(v);
                } else {
                    expected.push(cfg.neutral);
                }
            }
            let got = align_to_steps(&samples, &stamps_at(&times), &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(got, expected);
            Ok(())
        })
        .map_err(|e| format!("delay shift: {e}"))
}

/// Arbitrary streams agree with the exhaustive nearest-sample search.
fn prop_align_matches_oracle(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (delay(), sorted_times(30), prop::collection::vec((1u32..2200, value()), 0..40));
    runner
        .run(&strategy, |(d, times, raw)| {
            let cfg = GroundingConfig {
                delay: d,
                ..GroundingConfig::default()
            };
            let samples: Vec<FeedbackSample> = raw
                .iter()
                .map(|&(t, v)| FeedbackSample::new(lattice(t), v, FeedbackSource::Human))
                .collect();
            let stamps = stamps_at(&times);
            let got = align_to_steps(&samples, &stamps, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(got, align_oracle(&samples, &stamps, &cfg));
            Ok(())
        })
        .map_err(|e| format!("align oracle: {e}"))
}

fn prop_combine_is_addition(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (-1.0f64..=1.0, -20.0f64..20.0, 0.0f64..4.0);
    runner
        .run(&strategy, |(h, e, alpha)| {
            prop_assert_eq!(combine(h, e, 1.0), h + e);
            prop_assert_eq!(combine(h, e, alpha), alpha * h + e);
            prop_assert_eq!(combine(0.0, e, alpha), e);
            Ok(())
        })
        .map_err(|e| format!("combine: {e}"))
}

fn prop_window_membership(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (sorted_times(40), 0u32..2100);
    runner
        .run(&strategy, |(times, tf)| {
            let stamps = stamps_at(&times);
            let t = lattice(tf);
            let got = tamer_window_pairs(t, &stamps, 0.2, 4.0);
            prop_assert_eq!(&got, &window_oracle(t, &stamps, 0.2, 4.0));
            for (i, w) in &got {
                let lag = t - stamps[*i].t_wall;
                prop_assert!((0.2..=4.0).contains(&lag));
                prop_assert_eq!(*w, 1.0 / got.len() as f64);
            }
            Ok(())
        })
        .map_err(|e| format!("window membership: {e}"))
}

/// Runs every grounding property with `cases` cases each; returns the
/// total number of generated cases.
pub fn run_suite(cases: u32) -> Result<usize, String> {
    let props: [fn(&mut TestRunner) -> Result<(), String>; 4] = [
        prop_delay_shift,
        prop_align_matches_oracle,
        prop_combine_is_addition,
        prop_window_membership,
    ];
    for p in props {
        let mut runner = TestRunner::new_with_rng(
            Config {
                cases,
                failure_persistence: None,
                ..Config::default()
            },
            proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
        );
        p(&mut runner)?;
    }
    Ok(props.len() * cases as usize)
}
