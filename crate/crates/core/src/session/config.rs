use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentKind};
use crate::envs::{EnvConfig, TaskId};
use crate::error::{Error, Result};
use crate::grounding::GroundingConfig;
use crate::scripted::ScriptedConfig;
use crate::simulator::SimulatorConfig;

/// A phase budget: decision steps (deterministic) or seconds on the
/// session clock. Written as `120` for steps and
/// `600s` or `10m` for time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BudgetRepr", into = "BudgetRepr")]
pub enum Budget {
    Steps(u64),
    Seconds(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BudgetRepr {
    Steps(u64),
    Text(String),
}

impl TryFrom<BudgetRepr> for Budget {
    type Error = Error;

    fn try_from(r: BudgetRepr) -> Result<Self> {
        match r {
            BudgetRepr::Steps(n) => Ok(Budget::Steps(n)),
            BudgetRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Budget> for BudgetRepr {
    fn from(b: Budget) -> Self {
        match b {
            Budget::Steps(n) => BudgetRepr::Steps(n),
            Budget::Seconds(_) => BudgetRepr::Text(b.to_string()),
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("invalid budget '{s}' (expected e.g. 120, 600s or 10m)"));
        let seconds = |num: &str, scale: f64| {
            num.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| Budget::Seconds(v * scale))
                .ok_or_else(bad)
        };
        if let Some(n) = s.strip_suffix('s') {
            seconds(n, 1.0)
        } else if let Some(n) = s.strip_suffix('m') {
            seconds(n, 60.0)
        } else {
            s.parse().map(Budget::Steps).map_err(|_| bad())
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Steps(n) => write!(f, "{n}"),
            Budget::Seconds(s) => write!(f, "{s}s"),
        }
    }
}

impl Budget {
    fn is_positive(&self) -> bool {
        match *self {
            Budget::Steps(n) => n > 0,
            Budget::Seconds(s) => s > 0.0,
        }
    }

    pub(crate) fn amount(&self) -> f64 {
        match *self {
            Budget::Steps(n) => n as f64,
            Budget::Seconds(s) => s,
        }
    }

    fn same_unit(&self, other: &Budget) -> bool {
        matches!(
            (self, other),
            (Budget::Steps(_), Budget::Steps(_)) | (Budget::Seconds(_), Budget::Seconds(_))
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    Human,
    Scripted,
    None,
}

impl FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(FeedbackMode::Human),
            "scripted" => Ok(FeedbackMode::Scripted),
            "none" => Ok(FeedbackMode::None),
            other => Err(Error::Config(format!("unknown feedback source '{other}'"))),
        }
    }
}

/// What the agent is rewarded with once the simulator takes over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase2Reward {
    /// `α·Ĥ(s, a) + r_env`, the same combination as during guidance.
    Combined,
    /// `Ĥ(s, a)` alone.
    SimulatorOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub env: TaskId,
    pub agent: AgentKind,
    pub feedback: FeedbackMode,
    pub phase1: Budget,
    pub phase2: Budget,
    /// Defaults to 60 s for Bowling and 120 s for navigation, converted to
    /// decision steps in step mode.
    pub eval_interval: Option<Budget>,
    pub eval_episodes: usize,
    /// Seed of the evaluation layout set; defaults to `seed`.
    pub eval_seed: Option<u64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Session-clock seconds per decision step when budgets are in steps
    /// (and the pacing of human sessions). Defaults to 3 s for Bowling and
    /// 1 s for navigation.
    pub step_seconds: Option<f64>,
    pub phase2_reward: Phase2Reward,
    /// How long a paused or disconnected session waits before aborting.
    pub pause_timeout: f64,
    pub env_params: EnvConfig,
    pub agent_params: AgentConfig,
    /// Defaults to the task's delay and window.
    pub grounding: Option<GroundingConfig>,
    pub scripted: ScriptedConfig,
    pub simulator: SimulatorConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            env: TaskId::FindTreasure,
            agent: AgentKind::GuideDdpg,
            feedback: FeedbackMode::Scripted,
            phase1: Budget::Steps(1000),
            phase2: Budget::Steps(1000),
            eval_interval: None,
            eval_episodes: 50,
            eval_seed: None,
            seed: 0,
            out_dir: PathBuf::from("runs/session"),
            step_seconds: None,
            phase2_reward: Phase2Reward::Combined,
            pause_timeout: 300.0,
            env_params: EnvConfig::default(),
            agent_params: AgentConfig::default(),
            grounding: None,
            scripted: ScriptedConfig::default(),
            simulator: SimulatorConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SessionConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        SessionConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("session config serializes")
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds.unwrap_or(match self.env {
            TaskId::Bowling => 3.0,
            _ => 1.0,
        })
    }

    pub fn grounding(&self) -> GroundingConfig {
        self.grounding.unwrap_or_else(|| GroundingConfig::for_task(self.env))
    }

    pub fn eval_interval(&self) -> Budget {
        self.eval_interval.unwrap_or_else(|| {
            let secs = if self.env == TaskId::Bowling { 60.0 } else { 120.0 };
            match self.phase1 {
                Budget::Seconds(_) => Budget::Seconds(secs),
                Budget::Steps(_) => Budget::Steps(((secs / self.step_seconds()).round() as u64).max(1)),
            }
        })
    }

    pub fn eval_seed(&self) -> u64 {
        self.eval_seed.unwrap_or(self.seed)
    }

    /// Whether the trainer's (or a stand-in's) feedback reaches the agent.
    pub fn uses_feedback(&self) -> bool {
        self.agent != AgentKind::Ddpg && self.feedback != FeedbackMode::None
    }

    pub fn step_mode(&self) -> bool {
        matches!(self.phase1, Budget::Steps(_))
    }

    pub fn validate(&self) -> Result<()> {
        self.env_params.validate()?;
        self.agent_params.validate()?;
        self.grounding().validate()?;
        self.scripted.validate()?;
        // an empty automated phase keeps the trainer for the whole session
        if !self.phase1.is_positive() || !(self.phase2.amount() >= 0.0) {
            return Err(Error::Config("phase 1 must be positive and phase 2 nonnegative".into()));
        }
        let interval = self.eval_interval();
        if !self.phase1.same_unit(&self.phase2) || !self.phase1.same_unit(&interval) {
            return Err(Error::Config("budgets and eval interval must share one unit".into()));
        }
        if !interval.is_positive() || interval.amount() > self.phase1.amount().max(self.phase2.amount()) {
            return Err(Error::Config("eval interval must be positive and fit within a phase".into()));
        }
        if self.agent == AgentKind::CDeepTamer && self.feedback == FeedbackMode::None {
            return Err(Error::Config("c_deep_tamer learns only from feedback; choose human or scripted".into()));
        }
        if !(self.step_seconds() > 0.0) || !(self.pause_timeout >= 0.0) {
            return Err(Error::Config("step_seconds must be positive and pause_timeout nonnegative".into()));
        }
        Ok(())
    }
}
