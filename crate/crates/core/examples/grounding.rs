//! Grounds a delayed, continuous feedback stream onto decision steps, and
//! credits discrete button presses TAMER-style.
//!
//! ```text
//! cargo run --example grounding
//! ```

use guide::grounding::{
    align_to_steps, combine, tamer_window_pairs, FeedbackSample, FeedbackSource, GroundingConfig, GroundingMode,
    StepStamp,
};
use guide::envs::TaskId;

fn main() -> guide::Result<()> {
    // One decision per second; the trainer reacts about a second later and
    // skips step 3 entirely.
    let stamps: Vec<StepStamp> = (0..6)
        .map(|i| StepStamp { episode: 0, step: i, t_wall: i as f64 })
        .collect();
    let feedback: Vec<FeedbackSample> = [(1.1, 0.5), (2.0, 0.5), (2.9, -0.1), (5.05, 1.0), (6.0, 0.8)]
        .into_iter()
        .map(|(t, v)| FeedbackSample::new(t, v, FeedbackSource::Human))
        .collect();

    let config = GroundingConfig::for_task(TaskId::FindTreasure);
    let r_hf = align_to_steps(&feedback, &stamps, &config)?;
    println!("delay {} s, tolerance ±{} s", config.delay, config.delay / 2.0);
    for (s, r) in stamps.iter().zip(&r_hf) {
        println!("step {} at {:.1} s: r_hf {r:+.2}  reward {:+.2}", s.step, s.t_wall, combine(*r, -1.0, config.alpha));
    }

    let carry = GroundingConfig { carry_forward: true, ..config };
    println!("with carry-forward: {:?}", align_to_steps(&feedback, &stamps, &carry)?);

    let tamer = GroundingConfig { mode: GroundingMode::TamerWindow, ..GroundingConfig::for_task(TaskId::Bowling) };
    let press = 4.5;
    let credited = tamer_window_pairs(press, &stamps, tamer.window_lo, tamer.window_hi);
    println!("press at {press} s credits (step, weight): {credited:?}");
    Ok(())
}
