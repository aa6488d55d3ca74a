//! Runs a few short sessions into one directory and summarizes them into
//! learning-curve, exploration and milestone CSVs.
//!
//! ```text
//! cargo run --release --example analyze_runs
//! ```

use std::{env, fs};

use guide::agents::AgentKind;
use guide::eval::analyze;
use guide::session::{run_session, Budget, FeedbackMode, SessionConfig};

fn main() -> guide::Result<()> {
    let root = env::temp_dir().join("guide-analyze");
    let runs = root.join("runs");
    for seed in 0..3 {
        run_session(SessionConfig {
            agent: AgentKind::GuideDdpg,
            feedback: FeedbackMode::Scripted,
            phase1: Budget::Steps(300),
            phase2: Budget::Steps(300),
            eval_interval: Some(Budget::Steps(150)),
            eval_episodes: 20,
            seed,
            out_dir: runs.join(format!("seed-{seed}")),
            ..SessionConfig::default()
        })?;
    }
    let analysis = analyze(&runs, &root.join("report.csv"))?;
    println!("{} runs", analysis.runs);
    let mut files = vec![analysis.learning_curve, analysis.milestones];
    files.extend(analysis.exploration_curve);
    for path in files {
        println!("--- {}", path.display());
        print!("{}", fs::read_to_string(&path)?);
    }
    Ok(())
}
