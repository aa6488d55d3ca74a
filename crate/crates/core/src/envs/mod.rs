//! Desk-scale tasks: Bowling, Find Treasure and 1v1 Hide-and-Seek.
//!
//! Every environment is deterministic given `(seed, config, actions)`.

mod bowling;
mod grid;
mod nav;
mod render;
mod trace;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bowling::{rack, roll_ball, BowlingConfig, BowlingEnv, Pin, PinRow, Roll, ROLLS_PER_GAME};
pub use grid::{Cell, Grid, Heading};
pub use nav::{hider_step, visible_ratio, NavEnv, FRAME_STACK, NAV_CHANNELS, STEP_PENALTY, TREASURE_REWARD};
pub use render::{Frame, Palette, Rgb};
pub use trace::{read_trace, TraceRecord, TraceWriter};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    Bowling,
    FindTreasure,
    HideAndSeek,
}

impl TaskId {
    pub fn is_navigation(self) -> bool {
        self != TaskId::Bowling
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Bowling => "bowling",
            TaskId::FindTreasure => "find_treasure",
            TaskId::HideAndSeek => "hide_and_seek",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bowling" => Ok(TaskId::Bowling),
            "find_treasure" => Ok(TaskId::FindTreasure),
            "hide_and_seek" => Ok(TaskId::HideAndSeek),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Cells per side of the maze (and of the Bowling observation).
    pub grid_size: usize,
    pub visibility_radius: usize,
    /// Decision steps per navigation episode.
    pub horizon: usize,
    pub ticks_per_decision: usize,
    pub wall_density: f64,
    /// Chebyshev distance at which the hider starts fleeing.
    pub hider_range: usize,
    pub bowling: BowlingConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            grid_size: 16,
            visibility_radius: 2,
            horizon: 15,
            ticks_per_decision: 4,
            wall_density: 0.2,
            hider_range: 6,
            bowling: BowlingConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::Config("grid_size must be at least 2".into()));
        }
        if self.horizon == 0 || self.ticks_per_decision == 0 {
            return Err(Error::Config("horizon and ticks_per_decision must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.wall_density) {
            return Err(Error::Config("wall_density must be in [0, 1]".into()));
        }
        let b = &self.bowling;
        if b.lane_length <= 0.0 || b.hit_radius <= 0.0 || b.kappa_max < 0.0 {
            return Err(Error::Config("bowling constants must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EnvConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        EnvConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("env config serializes")
    }
}

/// Channel-major grid observation with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub success: bool,
    pub visible_ratio: f64,
    pub newly_explored_cells: usize,
    pub target_visible: bool,
    pub agent: Option<Cell>,
    pub target: Option<Cell>,
    pub pins_knocked: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

pub trait Environment: Send {
    fn task(&self) -> TaskId;
    fn config(&self) -> &EnvConfig;
    fn reset(&mut self, seed: u64) -> Result<Observation>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
    fn observation_shape(&self) -> [usize; 3];
    fn action_dim(&self) -> usize;
    fn is_done(&self) -> bool;
    fn render(&self) -> Frame;
    /// Step info describing the current state, as if reported by a no-op.
    fn info_snapshot(&self) -> StepInfo;
}

pub fn make_env(task: TaskId, config: EnvConfig) -> Result<Box<dyn Environment>> {
    Ok(match task {
        TaskId::Bowling => Box::new(BowlingEnv::new(config)?),
        nav => Box::new(NavEnv::new(nav, config)?),
    })
}

/// Observation shape and action width for a task without building it.
pub fn task_dims(task: TaskId, config: &EnvConfig) -> ([usize; 3], usize) {
    let g = config.grid_size;
    match task {
        TaskId::Bowling => ([1, g, g], 3),
        _ => ([NAV_CHANNELS * FRAME_STACK, g, g], 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = EnvConfig::default();
        assert_eq!(EnvConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = EnvConfig::from_toml("grid_size = 12\nhorizon = 20\n").unwrap();
        assert_eq!(partial.grid_size, 12);
        assert_eq!(partial.visibility_radius, 2);
        assert!(EnvConfig::from_toml("horizon = 0").is_err());
        assert!(EnvConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn task_names() {
        for t in [TaskId::Bowling, TaskId::FindTreasure, TaskId::HideAndSeek] {
            assert_eq!(t.as_str().parse::<TaskId>().unwrap(), t);
        }
        assert!("pong".parse::<TaskId>().is_err());
    }
}
