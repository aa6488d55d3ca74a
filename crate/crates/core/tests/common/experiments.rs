//! Small end-to-end experiments shared by the acceptance suite and the
//! integration tests.

use std::path::Path;

use guide::agents::{AgentConfig, AgentKind};
use guide::envs::{read_trace, TaskId};
use guide::eval::EvalResult;
use guide::scripted::ScriptedConfig;
use guide::grounding::{read_feedback_log, FeedbackSource, GroundingConfig};
use guide::session::{run_session, Budget, FeedbackMode, SessionConfig};
use guide::simulator::{trajectories_from_logs, SimulatorConfig, SimulatorModel, TrajectoryStore};

#[derive(Debug)]
pub struct Fidelity {
    pub episodes: usize,
    pub train: usize,
    pub validation: usize,
    pub rounds: usize,
    pub held_out_mse: f64,
    /// MSE of the best constant predictor on the validation split.
    pub label_variance: f64,
    /// The stopped model equals the snapshot taken at the best round.
    pub restored_exactly: bool,
}

/// Logs `episodes` Find Treasure episodes of a session trained with the
/// scripted trainer, rebuilds trajectories from the logs and fits a fresh
/// simulator on them until early stopping.
pub fn simulator_fidelity(dir: &Path, episodes: usize, seed: u64, config: SimulatorConfig) -> Fidelity {
    let session = SessionConfig {
        env: TaskId::FindTreasure,
        agent: AgentKind::GuideDdpg,
        feedback: FeedbackMode::Scripted,
        // enough decision steps for `episodes` full-horizon episodes
        phase1: Budget::Steps(15 * episodes as u64 + 15),
        phase2: Budget::Steps(1),
        eval_episodes: 1,
        seed,
        out_dir: dir.to_path_buf(),
        ..SessionConfig::default()
    };
    let env_params = session.env_params.clone();
    let report = run_session(session).unwrap();
    assert!(report.episodes as usize >= episodes);

    let trace: Vec<_> = read_trace(&dir.join("trace.jsonl"))
        .unwrap()
        .into_iter()
        .filter(|r| (r.episode as usize) < episodes)
        .collect();
    let feedback: Vec<_> = read_feedback_log(&dir.join("feedback.jsonl"))
        .unwrap()
        .into_iter()
        .filter(|s| s.source == FeedbackSource::Scripted)
        .collect();
    let trajectories = trajectories_from_logs(
        TaskId::FindTreasure,
        &env_params,
        &trace,
        &feedback,
        &GroundingConfig::for_task(TaskId::FindTreasure),
    )
    .unwrap();
    assert_eq!(trajectories.len(), episodes);

    let mut store = TrajectoryStore::new();
    for t in trajectories {
        store.ingest(t).unwrap();
    }
    let (obs_shape, action_dim) = guide::envs::task_dims(TaskId::FindTreasure, &env_params);
    let mut model = SimulatorModel::new(obs_shape, action_dim, config, seed).unwrap();
    let mut best = None;
    for _ in 0..1000 {
        model.train_round(&store).unwrap();
        let v = model.validate_and_maybe_stop(&store).unwrap();
        if v.improved {
            best = Some((model.fingerprint(), v.loss));
        }
        if v.stopped {
            break;
        }
    }
    let (best_fp, best_loss) = best.unwrap();
    let held_out_mse = model.validation_loss(&store).unwrap();
    let labels: Vec<f64> = store.validation().iter().flatten().map(|s| s.feedback).collect();
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let label_variance = labels.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / labels.len() as f64;
    Fidelity {
        episodes,
        train: store.train().len(),
        validation: store.validation().len(),
        rounds: model.rounds(),
        held_out_mse,
        label_variance,
        restored_exactly: model.is_stopped()
            && model.fingerprint() == best_fp
            && held_out_mse == best_loss
            && model.best_loss() == Some(best_loss),
    }
}

/// Agent settings for the Find Treasure learning experiments, shared by
/// GUIDE and the plain-DDPG baseline.
pub fn nav_agent() -> AgentConfig {
    AgentConfig {
        hidden: 64,
        actor_lr: 1e-4,
        critic_lr: 1e-3,
        batch_size: 32,
        ..AgentConfig::default()
    }
}

#[derive(Debug)]
pub struct NavRun {
    pub final_success: f64,
    /// The evaluation at a quarter of the step budget.
    pub quarter_eval: EvalResult,
}

/// One Find Treasure session with evaluations every quarter of the budget.
pub fn nav_run(dir: &Path, agent: AgentKind, feedback: FeedbackMode, phase1: u64, phase2: u64, seed: u64) -> NavRun {
    let total = phase1 + phase2;
    let config = SessionConfig {
        env: TaskId::FindTreasure,
        agent,
        feedback,
        phase1: Budget::Steps(phase1),
        phase2: Budget::Steps(phase2),
        eval_interval: Some(Budget::Steps(total / 4)),
        eval_episodes: 100,
        seed,
        out_dir: dir.to_path_buf(),
        agent_params: nav_agent(),
        ..SessionConfig::default()
    };
    let report = run_session(config).unwrap();
    assert!(report.aborted.is_none(), "{:?}", report.aborted);
    let final_success = report.final_metric().unwrap().value;
    let quarter_eval = evaluation_at(dir, total / 4).expect("quarter-budget evaluation");
    NavRun { final_success, quarter_eval }
}

/// The evaluation a session logged at decision step `step`.
pub fn evaluation_at(dir: &Path, step: u64) -> Option<EvalResult> {
    #[derive(serde::Deserialize)]
    struct Line {
        step: u64,
        result: EvalResult,
    }
    let text = std::fs::read_to_string(dir.join("evals.jsonl")).ok()?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<Line>(l).unwrap())
        .find(|l| l.step == step)
        .map(|l| l.result)
}

/// Final mean game score of c-Deep TAMER trained on Bowling with discrete
/// scripted feedback.
pub fn tamer_bowling(dir: &Path, steps: u64, seed: u64) -> f64 {
    let config = SessionConfig {
        env: TaskId::Bowling,
        agent: AgentKind::CDeepTamer,
        feedback: FeedbackMode::Scripted,
        phase1: Budget::Steps(steps / 2),
        phase2: Budget::Steps(steps - steps / 2),
        eval_interval: Some(Budget::Steps(steps / 4)),
        eval_episodes: 20,
        scripted: ScriptedConfig {
            discrete: true,
            ..ScriptedConfig::default()
        },
        agent_params: AgentConfig {
            action_l2: 0.1,
            ..AgentConfig::default()
        },
        seed,
        out_dir: dir.to_path_buf(),
        ..SessionConfig::default()
    };
    let report = run_session(config).unwrap();
    assert!(report.aborted.is_none(), "{:?}", report.aborted);
    report.final_metric().unwrap().value
}
