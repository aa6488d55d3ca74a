//! Plain DDPG against GUIDE-DDPG with a scripted trainer on Find Treasure.
//!
//! ```text
//! cargo run --release --example compare_agents -- [steps] [seeds]
//! ```

use std::env;

use guide::agents::AgentKind;
use guide::session::{run_session, Budget, FeedbackMode, SessionConfig};

fn main() -> guide::Result<()> {
    let args: Vec<String> = env::args().collect();
    let steps: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let root = env::temp_dir().join("guide-compare");

    for (agent, feedback) in [
        (AgentKind::Ddpg, FeedbackMode::None),
        (AgentKind::GuideDdpg, FeedbackMode::Scripted),
    ] {
        let mut finals = Vec::new();
        for seed in 0..seeds {
            let config = SessionConfig {
                agent,
                feedback,
                phase1: Budget::Steps(steps / 2),
                phase2: Budget::Steps(steps - steps / 2),
                eval_interval: Some(Budget::Steps(steps / 4)),
                eval_episodes: 100,
                seed,
                out_dir: root.join(format!("{agent}-{seed}")),
                ..SessionConfig::default()
            };
            let report = run_session(config)?;
            let curve: Vec<String> = report.records.iter().map(|r| format!("{:.2}", r.value)).collect();
            println!("{agent} seed {seed}: {}", curve.join(" "));
            finals.push(report.final_metric().map_or(0.0, |r| r.value));
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("{agent}: mean final success rate {mean:.3}");
    }
    Ok(())
}
