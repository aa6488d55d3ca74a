//! Logs a scripted-feedback session, rebuilds trajectories from the logs and
//! fits a feedback simulator on them with early stopping.
//!
//! ```text
//! cargo run --release --example feedback_simulator -- [episodes]
//! ```

use std::env;

use guide::agents::{AgentKind, EncoderKind};
use guide::envs::{read_trace, task_dims, TaskId};
use guide::grounding::{read_feedback_log, GroundingConfig};
use guide::session::{run_session, Budget, FeedbackMode, SessionConfig};
use guide::simulator::{trajectories_from_logs, SimulatorConfig, SimulatorModel, TrajectoryStore};

fn main() -> guide::Result<()> {
    let episodes: usize = env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let dir = env::temp_dir().join("guide-simulator");
    let session = SessionConfig {
        agent: AgentKind::GuideDdpg,
        feedback: FeedbackMode::Scripted,
        phase1: Budget::Steps(15 * episodes as u64 + 15),
        phase2: Budget::Steps(1),
        eval_episodes: 1,
        out_dir: dir.clone(),
        ..SessionConfig::default()
    };
    let env_params = session.env_params.clone();
    run_session(session)?;

    let trace: Vec<_> = read_trace(&dir.join("trace.jsonl"))?
        .into_iter()
        .filter(|r| (r.episode as usize) < episodes)
        .collect();
    let feedback = read_feedback_log(&dir.join("feedback.jsonl"))?;
    let grounding = GroundingConfig::for_task(TaskId::FindTreasure);
    let mut store = TrajectoryStore::new();
    for t in trajectories_from_logs(TaskId::FindTreasure, &env_params, &trace, &feedback, &grounding)? {
        store.ingest(t)?;
    }
    println!("{} train / {} validation trajectories", store.train().len(), store.validation().len());

    let (shape, action_dim) = task_dims(TaskId::FindTreasure, &env_params);
    let config = SimulatorConfig {
        encoder: EncoderKind::Conv,
        lr: 1e-3,
        batch_size: 8,
        augment: true,
        ..SimulatorConfig::default()
    };
    let mut model = SimulatorModel::new(shape, action_dim, config, 0)?;
    loop {
        let train = model.train_round(&store)?.unwrap_or(f64::NAN);
        let v = model.validate_and_maybe_stop(&store)?;
        println!("round {:3}  train {train:.4}  validation {:.4}{}", model.rounds(), v.loss, if v.improved { " *" } else { "" });
        if v.stopped {
            break;
        }
    }
    println!("restored best: validation {:.4}", model.validation_loss(&store)?);
    Ok(())
}
