use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{Budget, FeedbackMode, Phase2Reward, SessionConfig};
use super::gateway::{Gateway, GatewayEvent};
use super::protocol::{ControlAction, ServerMessage};
use crate::agents::{share, Agent, AgentKind, NetShape, SharedObs, TamerEntry, Transition};
use crate::envs::{make_env, task_dims, Environment, Observation, StepResult, TraceRecord, TraceWriter};
use crate::error::{Error, Result};
use crate::eval::{evaluate_policy, EvalResult, MetricRecord, Phase, EVAL_SEED_BASE};
use crate::grounding::{
    combine, discretize, tamer_window_pairs, FeedbackLog, FeedbackSample, FeedbackSource, FeedbackStream,
    GroundingConfig, PendingSteps, StepStamp,
};
use crate::nn::Checkpoint;
use crate::scripted::ScriptedTrainer;
use crate::simulator::{SimSample, SimulatorModel, TrajectoryStore};

/// Session time in seconds. Deterministic sessions advance a simulated
/// clock by a fixed amount per decision step; human sessions read the wall
/// clock from the same origin the gateway stamps feedback with.
#[derive(Clone, Copy, Debug)]
pub enum SessionClock {
    Simulated(f64),
    Wall(Instant),
}

impl SessionClock {
    pub fn now(&self) -> f64 {
        match self {
            SessionClock::Simulated(t) => *t,
            SessionClock::Wall(origin) => origin.elapsed().as_secs_f64(),
        }
    }

    /// Moves a simulated clock forward; a wall clock sleeps until `dt` has
    /// passed since `since`.
    fn advance(&mut self, dt: f64, since: f64) {
        match self {
            SessionClock::Simulated(t) => *t += dt,
            SessionClock::Wall(_) => {
                let wait = since + dt - self.now();
                if wait > 0.0 {
                    thread::sleep(Duration::from_secs_f64(wait));
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub phase1_steps: u64,
    pub phase2_steps: u64,
    pub episodes: u64,
    pub records: Vec<MetricRecord>,
    pub simulator_rounds: usize,
    pub simulator_validation_loss: Option<f64>,
    /// Set when the session ended early; the report is then partial.
    pub aborted: Option<String>,
}

impl SessionReport {
    pub fn final_metric(&self) -> Option<&MetricRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
struct PendingStep {
    obs: SharedObs,
    action: Vec<f64>,
    r_env: f64,
    next_obs: SharedObs,
    done: bool,
}

struct Outputs {
    dir: PathBuf,
    metrics: BufWriter<File>,
    evals: BufWriter<File>,
    trace: TraceWriter,
    feedback: Option<FeedbackLog>,
}

impl Outputs {
    fn create(dir: &Path, with_feedback: bool) -> Result<Self> {
        fs::create_dir_all(dir.join("checkpoints"))?;
        let file = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        let feedback_path = dir.join("feedback.jsonl");
        if feedback_path.exists() {
            fs::remove_file(&feedback_path)?;
        }
        Ok(Outputs {
            dir: dir.to_path_buf(),
            metrics: file("metrics.jsonl")?,
            evals: file("evals.jsonl")?,
            trace: TraceWriter::create(&dir.join("trace.jsonl"))?,
            feedback: if with_feedback {
                Some(FeedbackLog::create(&feedback_path)?)
            } else {
                None
            },
        })
    }

    fn flush(&mut self) -> Result<()> {
        self.metrics.flush()?;
        self.evals.flush()?;
        self.trace.flush()?;
        if let Some(f) = &mut self.feedback {
            f.flush()?;
        }
        Ok(())
    }
}

/// The two-phase training protocol: guidance with live (or scripted)
/// feedback while the simulator learns from it, then automated guidance
/// with the simulator standing in.
pub struct Session {
    config: SessionConfig,
    grounding: GroundingConfig,
    step_seconds: f64,
    session_id: String,
    env: Box<dyn Environment>,
    agent: Agent,
    simulator: Option<SimulatorModel>,
    store: TrajectoryStore,
    scripted: Option<ScriptedTrainer>,
    gateway: Option<Gateway>,
    clock: SessionClock,
    paused_total: f64,
    phase: Phase,
    phase_started: f64,
    stream: FeedbackStream,
    pending: PendingSteps<PendingStep>,
    tamer_events: VecDeque<FeedbackSample>,
    recent_steps: VecDeque<(StepStamp, SharedObs, Vec<f64>)>,
    episode_samples: Vec<SimSample>,
    episodes_since_round: usize,
    out: Outputs,
    layout_rng: ChaCha8Rng,
    steps: u64,
    phase_steps: [u64; 2],
    episode: u64,
    episode_seed: u64,
    episode_step: usize,
    episode_return: f64,
    successes: u64,
    next_eval: f64,
    records: Vec<MetricRecord>,
}

/// Runs a session with scripted or no feedback to completion.
pub fn run_session(config: SessionConfig) -> Result<SessionReport> {
    Session::new(config, None)?.run()
}

/// Runs a session whose trainer connects through `gateway`.
pub fn run_session_with_gateway(config: SessionConfig, gateway: Gateway) -> Result<SessionReport> {
    Session::new(config, Some(gateway))?.run()
}

impl Session {
    pub fn new(config: SessionConfig, gateway: Option<Gateway>) -> Result<Self> {
        config.validate()?;
        if config.feedback == FeedbackMode::Human && gateway.is_none() {
            return Err(Error::Config("human feedback needs a gateway (use `guide serve`)".into()));
        }
        if config.agent == AgentKind::Ddpg && config.feedback != FeedbackMode::None {
            warn!("ddpg ignores the {:?} feedback source", config.feedback);
        }
        let uses_feedback = config.uses_feedback();
        let out = Outputs::create(&config.out_dir, uses_feedback)?;
        fs::write(config.out_dir.join("config.toml"), config.to_toml())?;

        let task = config.env;
        let env = make_env(task, config.env_params.clone())?;
        let (obs_shape, action_dim) = task_dims(task, &config.env_params);
        let shape = NetShape {
            obs_shape,
            action_dim,
            encoder: config.agent_params.encoder,
            hidden: config.agent_params.hidden,
            depth: config.agent_params.depth,
        };
        let agent = Agent::new(config.agent, shape, config.agent_params, config.seed)?;
        let grounding = config.grounding();
        let simulator = if uses_feedback {
            let mut sim_config = config.simulator;
            sim_config.augment &= task.is_navigation();
            Some(SimulatorModel::new(
                obs_shape,
                action_dim,
                sim_config,
                config.seed.wrapping_add(1),
            )?)
        } else {
            None
        };
        let scripted = if uses_feedback && config.feedback == FeedbackMode::Scripted {
            let mut sc = config.scripted;
            sc.seed = sc.seed.wrapping_add(config.seed);
            Some(ScriptedTrainer::new(task, config.env_params.grid_size, grounding.delay, sc)?)
        } else {
            None
        };
        let clock = match (&gateway, config.step_mode()) {
            (Some(g), _) => SessionClock::Wall(g.origin()),
            (None, true) => SessionClock::Simulated(0.0),
            (None, false) => SessionClock::Wall(Instant::now()),
        };
        let interval = match config.eval_interval() {
            Budget::Steps(n) => n as f64,
            Budget::Seconds(s) => s,
        };
        Ok(Session {
            session_id: format!("{}-{}-{}", task, config.agent, config.seed),
            step_seconds: config.step_seconds(),
            grounding,
            env,
            agent,
            simulator,
            store: TrajectoryStore::new(),
            scripted,
            gateway,
            clock,
            paused_total: 0.0,
            phase: Phase::Idle,
            phase_started: 0.0,
            stream: FeedbackStream::new(),
            pending: PendingSteps::new(grounding),
            tamer_events: VecDeque::new(),
            recent_steps: VecDeque::new(),
            episode_samples: Vec::new(),
            episodes_since_round: 0,
            out,
            layout_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_1a70),
            steps: 0,
            phase_steps: [0; 2],
            episode: 0,
            episode_seed: 0,
            episode_step: 0,
            episode_return: 0.0,
            successes: 0,
            next_eval: interval,
            records: Vec::new(),
            config,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn simulator(&self) -> Option<&SimulatorModel> {
        self.simulator.as_ref()
    }

    fn uses_feedback(&self) -> bool {
        self.config.uses_feedback()
    }

    fn is_tamer(&self) -> bool {
        self.config.agent == AgentKind::CDeepTamer
    }

    /// Session time with pauses removed.
    fn active_time(&self) -> f64 {
        self.clock.now() - self.paused_total
    }

    pub fn run(mut self) -> Result<SessionReport> {
        if self.gateway.is_some() {
            if let Some(reason) = self.wait_for_start()? {
                return self.finish(Some(reason));
            }
        }
        self.phase = Phase::Guidance;
        self.phase_started = self.active_time();
        info!("session {} started", self.session_id);
        let mut obs = self.reset_episode()?;
        'run: loop {
            if let Some(reason) = self.poll_gateway()? {
                return self.finish(Some(reason));
            }
            while self.phase_exhausted() {
                if !self.advance_phase()? {
                    break 'run;
                }
            }
            obs = self.step(obs)?;
            self.maybe_evaluate()?;
        }
        if self.records.last().map_or(true, |r| r.step != self.steps) {
            self.evaluate_now()?;
        }
        self.finish(None)
    }

    fn phase_exhausted(&self) -> bool {
        let (budget, used) = match self.phase {
            Phase::Guidance => (self.config.phase1, self.phase_steps[0]),
            Phase::Automated => (self.config.phase2, self.phase_steps[1]),
            _ => return true,
        };
        match budget {
            Budget::Steps(n) => used >= n,
            Budget::Seconds(s) => self.active_time() - self.phase_started >= s,
        }
    }

    /// Moves to the next phase; `false` once the session is done.
    fn advance_phase(&mut self) -> Result<bool> {
        match self.phase {
            Phase::Guidance => {
                self.settle_feedback()?;
                if self.simulator.is_some() && self.config.phase2.amount() > 0.0 {
                    let partial = std::mem::take(&mut self.episode_samples);
                    if !partial.is_empty() {
                        self.store.ingest(partial)?;
                    }
                    self.train_simulator()?;
                    if !self.simulator.as_ref().is_some_and(|s| s.is_trained()) {
                        return Err(Error::Aborted(
                            "the feedback simulator has no training data at the end of guidance".into(),
                        ));
                    }
                }
                info!("guidance finished after {} steps", self.phase_steps[0]);
                self.phase = Phase::Automated;
                self.phase_started = self.active_time();
                Ok(true)
            }
            _ => {
                self.phase = Phase::Done;
                Ok(false)
            }
        }
    }

    fn reset_episode(&mut self) -> Result<Observation> {
        self.episode_seed = self.layout_rng.gen_range(0..EVAL_SEED_BASE);
        self.episode_step = 0;
        self.episode_return = 0.0;
        self.env.reset(self.episode_seed)
    }

    fn step(&mut self, obs: Observation) -> Result<Observation> {
        let t = self.clock.now();
        let action = self.agent.act(&obs.data, true)?;
        let res = self.env.step(&action)?;
        self.steps += 1;
        let phase_idx = if self.phase == Phase::Guidance { 0 } else { 1 };
        self.phase_steps[phase_idx] += 1;
        self.episode_return += res.reward;
        self.out.trace.append(&TraceRecord {
            episode: self.episode,
            seed: self.episode_seed,
            step: self.episode_step,
            t_wall: t,
            agent: res.info.agent,
            action: action.clone(),
            r_env: res.reward,
            visible_ratio: res.info.visible_ratio,
            done: res.done,
        })?;
        self.send_frame(&res)?;

        let stamp = StepStamp {
            episode: self.episode,
            step: self.episode_step,
            t_wall: t,
        };
        let obs_s = share(&obs.data);
        let next_s = share(&res.observation.data);
        self.episode_step += 1;
        match (self.phase, self.uses_feedback()) {
            (Phase::Guidance, true) => {
                if let Some(trainer) = &mut self.scripted {
                    if let Some(sample) = trainer.feedback(&res.info, t) {
                        self.ingest_feedback(sample)?;
                    }
                }
                if self.is_tamer() {
                    self.recent_steps.push_back((stamp, obs_s.clone(), action.clone()));
                }
                self.pending.push(
                    stamp,
                    PendingStep {
                        obs: obs_s,
                        action,
                        r_env: res.reward,
                        next_obs: next_s,
                        done: res.done,
                    },
                );
            }
            (_, true) => self.automated_step(t, obs_s, action, &res, next_s)?,
            (_, false) => self.observe(Transition {
                obs: obs_s,
                action,
                reward: res.reward,
                next_obs: next_s,
                done: res.done,
                n_steps: 1,
            })?,
        }
        self.clock.advance(self.step_seconds, t);
        self.release_ready(false)?;
        if res.done {
            self.end_episode(res.info.success)?;
            return self.reset_episode();
        }
        Ok(res.observation)
    }

    fn automated_step(&mut self, t: f64, obs: SharedObs, action: Vec<f64>, res: &StepResult, next: SharedObs) -> Result<()> {
        let sim = self
            .simulator
            .as_ref()
            .expect("feedback sessions have a simulator");
        // the simulator judges the step directly: no reaction delay to undo
        let f = sim.predict(&res.observation.data, &action)?;
        let sample = FeedbackSample::new(t, f, FeedbackSource::Simulated);
        if let Some(log) = &mut self.out.feedback {
            log.append(&sample)?;
        }
        if self.is_tamer() {
            return self.observe_feedback(vec![TamerEntry {
                obs,
                action,
                feedback: discretize(sample.value),
                weight: 1.0,
            }]);
        }
        let alpha = self.grounding.alpha;
        let reward = match self.config.phase2_reward {
            Phase2Reward::Combined => combine(sample.value, res.reward, alpha),
            Phase2Reward::SimulatorOnly => alpha * sample.value,
        };
        self.observe(Transition {
            obs,
            action,
            reward,
            next_obs: next,
            done: res.done,
            n_steps: 1,
        })
    }

    fn observe(&mut self, t: Transition) -> Result<()> {
        match &mut self.agent {
            Agent::Ddpg { inner, .. } => {
                inner.observe(t)?;
            }
            Agent::Tamer(_) => {}
        }
        Ok(())
    }

    fn observe_feedback(&mut self, entries: Vec<TamerEntry>) -> Result<()> {
        if let Agent::Tamer(t) = &mut self.agent {
            t.observe_feedback(entries)?;
        }
        Ok(())
    }

    fn ingest_feedback(&mut self, sample: FeedbackSample) -> Result<()> {
        if let Some(log) = &mut self.out.feedback {
            log.append(&sample)?;
        }
        if self.is_tamer() {
            let at = self
                .tamer_events
                .partition_point(|e| e.t_wall <= sample.t_wall);
            self.tamer_events.insert(at, sample);
        }
        self.stream.push(sample);
        Ok(())
    }

    /// Grounds every pending step whose feedback window has closed (or all
    /// of them with `all`), and credits due discrete feedback events.
    fn release_ready(&mut self, all: bool) -> Result<()> {
        let now = self.clock.now();
        let ready = if all {
            self.pending.drain_all(&mut self.stream)?
        } else {
            self.pending.drain_ready(now, &mut self.stream)?
        };
        let alpha = self.grounding.alpha;
        for (_, p, r_hf) in ready {
            if self.simulator.is_some() {
                self.episode_samples
                    .push(SimSample {
                        obs: p.next_obs.clone(),
                        action: p.action.clone(),
                        feedback: r_hf,
                    });
            }
            if !self.is_tamer() {
                self.observe(Transition {
                    obs: p.obs,
                    action: p.action,
                    reward: combine(r_hf, p.r_env, alpha),
                    next_obs: p.next_obs,
                    done: p.done,
                    n_steps: 1,
                })?;
            }
        }
        if self.is_tamer() {
            self.credit_tamer_events(now, all)?;
        }
        Ok(())
    }

    fn credit_tamer_events(&mut self, now: f64, all: bool) -> Result<()> {
        let (lo, hi) = (self.grounding.window_lo, self.grounding.window_hi);
        while let Some(event) = self.tamer_events.front().copied() {
            if !all && event.t_wall > now {
                break;
            }
            self.tamer_events.pop_front();
            let stamps: Vec<StepStamp> = self.recent_steps.iter().map(|(s, _, _)| *s).collect();
            let entries: Vec<TamerEntry> = tamer_window_pairs(event.t_wall, &stamps, lo, hi)
                .into_iter()
                .map(|(i, w)| {
                    let (_, obs, action) = &self.recent_steps[i];
                    TamerEntry {
                        obs: obs.clone(),
                        action: action.clone(),
                        feedback: event.value,
                        weight: w,
                    }
                })
                .collect();
            self.observe_feedback(entries)?;
        }
        // steps older than any future event's window can go
        let horizon = now - hi - 2.0 * self.grounding.delay - self.step_seconds;
        while self
            .recent_steps
            .front()
            .is_some_and(|(s, _, _)| s.t_wall < horizon)
        {
            self.recent_steps.pop_front();
        }
        Ok(())
    }

    /// Lets every outstanding feedback window close, then grounds all
    /// pending steps.
    fn settle_feedback(&mut self) -> Result<()> {
        if self.pending.is_empty() && self.tamer_events.is_empty() {
            return Ok(());
        }
        let horizon = self.grounding.delay + self.grounding.tolerance();
        let now = self.clock.now();
        match self.clock {
            SessionClock::Simulated(_) => self.clock.advance(horizon, now),
            SessionClock::Wall(_) if self.config.feedback == FeedbackMode::Human => {
                let until = self.pending.settle_time().unwrap_or(now).max(now);
                while self.clock.now() < until {
                    if let Some(reason) = self.poll_gateway()? {
                        return Err(Error::Aborted(reason));
                    }
                    thread::sleep(Duration::from_millis(10));
                }
            }
            SessionClock::Wall(_) => {}
        }
        self.release_ready(true)
    }

    fn end_episode(&mut self, success: bool) -> Result<()> {
        if self.phase == Phase::Guidance && self.uses_feedback() {
            self.settle_feedback()?;
            let samples = std::mem::take(&mut self.episode_samples);
            if !samples.is_empty() {
                self.store.ingest(samples)?;
                self.episodes_since_round += 1;
                if self.episodes_since_round >= self.config.simulator.train_every.max(1) {
                    self.train_simulator()?;
                }
            }
        }
        self.episode += 1;
        self.successes += success as u64;
        if let Some(g) = &self.gateway {
            g.send(&ServerMessage::Stats {
                episode_return: self.episode_return,
                success_rate: self.successes as f64 / self.episode as f64,
            });
        }
        Ok(())
    }

    fn train_simulator(&mut self) -> Result<()> {
        self.episodes_since_round = 0;
        let Some(sim) = &mut self.simulator else {
            return Ok(());
        };
        if sim.is_stopped() {
            return Ok(());
        }
        sim.train_round(&self.store)?;
        if !self.store.validation().is_empty() {
            let report = sim.validate_and_maybe_stop(&self.store)?;
            if report.stopped {
                info!("simulator early-stopped at validation loss {:?}", sim.best_loss());
            }
        }
        Ok(())
    }

    fn send_frame(&mut self, res: &StepResult) -> Result<()> {
        let Some(g) = &self.gateway else {
            return Ok(());
        };
        if !g.is_connected() {
            return Ok(());
        }
        let png = self.env.render().to_png()?;
        g.send(&ServerMessage::Frame {
            session_id: self.session_id.clone(),
            step: self.steps,
            image: base64::engine::general_purpose::STANDARD.encode(png),
            phase: self.phase,
            last_reward: res.reward,
        });
        Ok(())
    }

    fn wait_for_start(&mut self) -> Result<Option<String>> {
        let deadline = Instant::now() + Duration::from_secs_f64(self.config.pause_timeout);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(Some("no trainer started the session before the timeout".into()));
            }
            let event = self.gateway.as_ref().and_then(|g| g.wait_event(left));
            if let Some(GatewayEvent::Control {
                action: ControlAction::Start | ControlAction::Resume,
                ..
            }) = event
            {
                return Ok(None);
            }
        }
    }

    /// Applies gateway events at a decision-step boundary. Returns an abort
    /// reason if a pause or disconnect outlasts the timeout.
    fn poll_gateway(&mut self) -> Result<Option<String>> {
        let mut paused = None;
        loop {
            let event = match (&self.gateway, paused) {
                (None, _) => return Ok(None),
                (Some(g), None) => match g.try_event() {
                    Some(e) => e,
                    None => return Ok(None),
                },
                (Some(g), Some((since, _))) => {
                    let elapsed = Instant::now().duration_since(since).as_secs_f64();
                    let left = self.config.pause_timeout - elapsed;
                    match (left > 0.0)
                        .then(|| g.wait_event(Duration::from_secs_f64(left.min(0.25))))
                    {
                        Some(Some(e)) => e,
                        Some(None) => continue,
                        None => {
                            let why: &str = paused.map(|(_, w)| w).unwrap_or("paused");
                            return Ok(Some(format!("session {why} for longer than {} s", self.config.pause_timeout)));
                        }
                    }
                }
            };
            match event {
                GatewayEvent::Feedback(s) => {
                    if self.phase == Phase::Guidance && self.uses_feedback() {
                        self.ingest_feedback(s)?;
                    }
                }
                GatewayEvent::Control { action, mode } => match action {
                    ControlAction::Pause => {
                        if paused.is_none() {
                            paused = Some((Instant::now(), "paused"));
                        }
                    }
                    ControlAction::Resume | ControlAction::Start => {
                        if let Some((since, _)) = paused.take() {
                            self.paused_total += since.elapsed().as_secs_f64();
                        }
                    }
                    ControlAction::Mode => info!("trainer switched input mode to {mode:?}"),
                },
                GatewayEvent::Disconnected => {
                    warn!("trainer disconnected; pausing");
                    if paused.is_none() {
                        paused = Some((Instant::now(), "disconnected"));
                    }
                }
                GatewayEvent::Connected => {
                    if let Some((since, "disconnected")) = paused {
                        self.paused_total += since.elapsed().as_secs_f64();
                        paused = None;
                    }
                }
            }
        }
    }

    fn progress(&self) -> f64 {
        match self.config.phase1 {
            Budget::Steps(_) => self.steps as f64,
            Budget::Seconds(_) => self.active_time(),
        }
    }

    fn maybe_evaluate(&mut self) -> Result<()> {
        let interval = match self.config.eval_interval() {
            Budget::Steps(n) => n as f64,
            Budget::Seconds(s) => s,
        };
        if self.progress() >= self.next_eval {
            self.evaluate_now()?;
            while self.next_eval <= self.progress() {
                self.next_eval += interval;
            }
        }
        Ok(())
    }

    fn checkpoint_metadata(&self) -> serde_json::Value {
        json!({
            "env": self.config.env,
            "env_config": self.config.env_params,
            "step": self.steps,
            "episodes": self.episode,
            "seed": self.config.seed,
            "phase": self.phase,
        })
    }

    /// Evaluates a snapshot of the current policy, checkpoints the agent and
    /// appends the metric record.
    fn evaluate_now(&mut self) -> Result<EvalResult> {
        let policy = self.agent.policy();
        let mut result = evaluate_policy(
            &policy,
            self.config.env,
            &self.config.env_params,
            self.config.eval_episodes,
            self.config.eval_seed(),
        )?;
        let rel = format!("checkpoints/step_{:08}.ckpt", self.steps);
        self.agent
            .to_checkpoint(self.checkpoint_metadata())
            .save(&self.out.dir.join(&rel))?;
        result.checkpoint = Some(rel.clone());
        let (metric, value) = result.metric();
        let record = MetricRecord {
            t_wall: self.active_time(),
            phase: self.phase,
            step: self.steps,
            metric: metric.to_string(),
            value,
            checkpoint: rel,
        };
        serde_json::to_writer(&mut self.out.metrics, &record)?;
        self.out.metrics.write_all(b"\n")?;
        serde_json::to_writer(
            &mut self.out.evals,
            &json!({"step": self.steps, "phase": self.phase, "result": result}),
        )?;
        self.out.evals.write_all(b"\n")?;
        self.out.flush()?;
        info!("step {}: {} = {}", self.steps, metric, value);
        self.records.push(record);
        Ok(result)
    }

    fn finish(mut self, aborted: Option<String>) -> Result<SessionReport> {
        if aborted.is_some() {
            // whatever feedback already arrived still reaches the agent
            self.release_ready(true)?;
        }
        self.phase = Phase::Done;
        self.agent
            .to_checkpoint(self.checkpoint_metadata())
            .save(&self.out.dir.join("final.ckpt"))?;
        if let Some(sim) = &self.simulator {
            if sim.is_trained() {
                sim.to_checkpoint().save(&self.out.dir.join("simulator.ckpt"))?;
            }
        }
        self.out.flush()?;
        let report = SessionReport {
            session_id: self.session_id.clone(),
            phase1_steps: self.phase_steps[0],
            phase2_steps: self.phase_steps[1],
            episodes: self.episode,
            records: self.records.clone(),
            simulator_rounds: self.simulator.as_ref().map_or(0, |s| s.rounds()),
            simulator_validation_loss: self.simulator.as_ref().and_then(|s| s.best_loss()),
            aborted,
        };
        fs::write(
            self.out.dir.join("report.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        Ok(report)
    }
}

/// Restores the agent stored in a session checkpoint.
pub fn restore_agent(path: &Path) -> Result<Agent> {
    Agent::from_checkpoint(&Checkpoint::load(path)?)
}
