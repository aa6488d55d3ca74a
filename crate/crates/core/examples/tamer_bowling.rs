//! c-Deep TAMER on Bowling with discrete scripted button presses, against
//! a uniformly random bowler.
//!
//! ```text
//! cargo run --release --example tamer_bowling -- [steps] [seed]
//! ```

use std::env;

use guide::agents::AgentKind;
use guide::envs::{EnvConfig, TaskId};
use guide::eval::evaluate_with;
use guide::scripted::ScriptedConfig;
use guide::session::{run_session, Budget, FeedbackMode, SessionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> guide::Result<()> {
    let args: Vec<String> = env::args().collect();
    let steps: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let config = SessionConfig {
        env: TaskId::Bowling,
        agent: AgentKind::CDeepTamer,
        feedback: FeedbackMode::Scripted,
        phase1: Budget::Steps(steps / 2),
        phase2: Budget::Steps(steps - steps / 2),
        eval_interval: Some(Budget::Steps(steps / 4)),
        eval_episodes: 20,
        scripted: ScriptedConfig { discrete: true, ..ScriptedConfig::default() },
        seed,
        out_dir: env::temp_dir().join("guide-tamer"),
        ..SessionConfig::default()
    };
    let report = run_session(config)?;
    for r in &report.records {
        println!("step {:5} ({}): mean score {:.1}", r.step, r.phase.as_str(), r.value);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = evaluate_with(TaskId::Bowling, &EnvConfig::default(), 100, seed, |_| {
        Ok((0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
    })?;
    println!("random bowler: mean score {:.1}", random.metric().1);
    Ok(())
}
