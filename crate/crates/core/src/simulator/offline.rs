use super::{SimSample, Trajectory};
use crate::envs::{make_env, EnvConfig, TaskId, TraceRecord};
use crate::error::{Error, Result};
use crate::grounding::{align_to_steps, FeedbackSample, GroundingConfig, StepStamp};

/// Rebuilds simulator trajectories from a session's trace and feedback log.
///
/// Each episode is replayed from its recorded layout seed and actions to
/// recover the observations; feedback is grounded onto the steps with the
/// same alignment the live session used. A trace whose rewards do not
/// replay exactly is rejected.
pub fn trajectories_from_logs(
    task: TaskId,
    env_config: &EnvConfig,
    trace: &[TraceRecord],
    feedback: &[FeedbackSample],
    grounding: &GroundingConfig,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    let mut env = make_env(task, env_config.clone())?;
    let mut start = 0;
    while start < trace.len() {
        let episode = trace[start].episode;
        let end = start
            + trace[start..]
                .iter()
                .take_while(|r| r.episode == episode)
                .count();
        let records = &trace[start..end];
        env.reset(records[0].seed)?;
        let mut observations = Vec::with_capacity(records.len());
        for r in records {
            let step = env.step(&r.action)?;
            if step.reward != r.r_env {
                return Err(Error::Config(format!(
                    "trace episode {episode} step {} does not replay (reward {} vs {})",
                    r.step, step.reward, r.r_env
                )));
            }
            observations.push(step.observation.data);
        }
        let stamps: Vec<StepStamp> = records
            .iter()
            .map(|r| StepStamp {
                episode,
                step: r.step,
                t_wall: r.t_wall,
            })
            .collect();
        let values = align_to_steps(feedback, &stamps, grounding)?;
        out.push(
            records
                .iter()
                .zip(observations)
                .zip(values)
                .map(|((r, obs), f)| SimSample::new(&obs, &r.action, f))
                .collect(),
        );
        start = end;
    }
    Ok(out)
}
