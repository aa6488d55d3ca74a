use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::{Cell, Grid, Heading};
use super::render::{Frame, Palette};
use super::{EnvConfig, Environment, Observation, StepInfo, StepResult, TaskId};
use crate::error::{Error, Result};

pub const NAV_CHANNELS: usize = 4;
pub const FRAME_STACK: usize = 3;
pub const TREASURE_REWARD: f64 = 10.0;
pub const STEP_PENALTY: f64 = -1.0;

/// Find Treasure and 1v1 Hide-and-Seek on a partially observed maze.
///
/// The agent chooses a destination cell each decision step; a
/// breadth-first planner moves it there for at most
/// `ticks_per_decision` primitive ticks.
#[derive(Clone, Debug)]
pub struct NavEnv {
    task: TaskId,
    config: EnvConfig,
    grid: Grid,
    agent: Cell,
    target: Cell,
    heading: Heading,
    explored: Vec<bool>,
    frames: VecDeque<Vec<f64>>,
    steps: usize,
    ticks: u64,
    done: bool,
    success: bool,
}

impl NavEnv {
    pub fn new(task: TaskId, config: EnvConfig) -> Result<Self> {
        if task == TaskId::Bowling {
            return Err(Error::Config("bowling is not a navigation task".into()));
        }
        config.validate()?;
        let size = config.grid_size;
        Ok(NavEnv {
            task,
            grid: Grid::open(size),
            agent: Cell::new(0, 0),
            target: Cell::new(0, 0),
            heading: Heading::North,
            explored: vec![false; size * size],
            frames: VecDeque::new(),
            steps: 0,
            ticks: 0,
            done: true,
            success: false,
            config,
        })
    }

    /// Starts an episode on a fixed layout. Used by tests and replays that
    /// need hand-built mazes.
    pub fn reset_with(&mut self, grid: Grid, agent: Cell, target: Cell, heading: Heading) -> Result<Observation> {
        if grid.size() != self.config.grid_size {
            return Err(Error::Config("layout size differs from configured grid size".into()));
        }
        if !grid.is_free(agent) || !grid.is_free(target) || agent == target {
            return Err(Error::Generation("agent and target need distinct free cells".into()));
        }
        self.grid = grid;
        self.agent = agent;
        self.target = target;
        self.heading = heading;
        self.explored.iter_mut().for_each(|e| *e = false);
        self.steps = 0;
        self.ticks = 0;
        self.done = false;
        self.success = false;
        self.reveal();
        let frame = self.frame();
        self.frames = std::iter::repeat(frame).take(FRAME_STACK).collect();
        Ok(self.observation())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn agent(&self) -> Cell {
        self.agent
    }

    pub fn target(&self) -> Cell {
        self.target
    }

    pub fn heading(&self) -> Heading {
        self.heading
    }

    pub fn explored(&self) -> &[bool] {
        &self.explored
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn target_visible(&self) -> bool {
        self.explored[self.grid.index(self.target)]
    }

    pub fn visible_ratio(&self) -> f64 {
        visible_ratio(&self.explored)
    }

    /// Destination cell for an action in `[0,1]²`: `floor(a·G)` clamped to
    /// the grid.
    pub fn decode(&self, action: &[f64]) -> Cell {
        let g = self.config.grid_size;
        let axis = |a: f64| ((a.clamp(0.0, 1.0) * g as f64).floor() as usize).min(g - 1);
        Cell::new(axis(action[0]), axis(action[1]))
    }

    fn reveal(&mut self) -> usize {
        let mut new = 0;
        for c in self.grid.square(self.agent, self.config.visibility_radius) {
            let i = self.grid.index(c);
            if !self.explored[i] {
                self.explored[i] = true;
                new += 1;
            }
        }
        new
    }

    fn caught(&self) -> bool {
        match self.task {
            TaskId::FindTreasure => self.agent == self.target,
            _ => self.agent.chebyshev(self.target) <= 1,
        }
    }

    fn frame(&self) -> Vec<f64> {
        let n = self.explored.len();
        let mut f = vec![0.0; NAV_CHANNELS * n];
        for i in 0..n {
            if self.explored[i] {
                f[i] = 1.0;
                if self.grid.walls()[i] {
                    f[n + i] = 1.0;
                }
            }
        }
        f[2 * n + self.grid.index(self.agent)] = 1.0;
        if self.target_visible() {
            f[3 * n + self.grid.index(self.target)] = 1.0;
        }
        f
    }

    fn observation(&self) -> Observation {
        let g = self.config.grid_size;
        let data = self.frames.iter().flatten().copied().collect();
        Observation {
            shape: [NAV_CHANNELS * FRAME_STACK, g, g],
            data,
        }
    }

    fn info(&self, newly_explored: usize) -> StepInfo {
        StepInfo {
            success: self.success,
            visible_ratio: self.visible_ratio(),
            newly_explored_cells: newly_explored,
            target_visible: self.target_visible(),
            agent: Some(self.agent),
            target: Some(self.target),
            pins_knocked: None,
        }
    }
}

impl Environment for NavEnv {
    fn task(&self) -> TaskId {
        self.task
    }

    fn config(&self) -> &EnvConfig {
        &self.config
    }

    fn reset(&mut self, seed: u64) -> Result<Observation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.config.grid_size;
        let r = self.config.visibility_radius;
        let grid = Grid::generate(g, self.config.wall_density, 2, &mut rng)?;
        let free: Vec<Cell> = grid.free_cells().collect();
        let agent = free[rng.gen_range(0..free.len())];
        // The target starts outside the initial visibility square whenever
        // the layout allows it.
        let far: Vec<Cell> = free
            .iter()
            .copied()
            .filter(|c| c.chebyshev(agent) > r)
            .collect();
        let pool: Vec<Cell> = if far.is_empty() {
            free.iter().copied().filter(|c| *c != agent).collect()
        } else {
            far
        };
        let target = pool[rng.gen_range(0..pool.len())];
        let heading = Heading::ALL[rng.gen_range(0..4)];
        self.reset_with(grid, agent, target, heading)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        if action.len() != 2 {
            return Err(Error::shape(&[2], &[action.len()]));
        }
        let destination = self.decode(action);
        let path = self.grid.plan_path(self.agent, destination);
        let k = self.config.ticks_per_decision;
        let mut newly = 0;
        let moving_target = self.task == TaskId::HideAndSeek;
        let mut moves = path.into_iter().take(k);
        for _ in 0..k {
            let next = moves.next();
            if next.is_none() && !moving_target {
                break;
            }
            if let Some(c) = next {
                self.agent = c;
            }
            self.ticks += 1;
            newly += self.reveal();
            if self.caught() {
                self.success = true;
                break;
            }
            if moving_target {
                let (cell, heading) = hider_step(
                    &self.grid,
                    self.target,
                    self.heading,
                    self.agent,
                    self.config.hider_range,
                );
                self.target = cell;
                self.heading = heading;
                if self.caught() {
                    self.success = true;
                    break;
                }
            }
        }
        self.steps += 1;
        let mut reward = STEP_PENALTY;
        if self.success {
            reward += TREASURE_REWARD;
        }
        self.done = self.success || self.steps >= self.config.horizon;
        let frame = self.frame();
        self.frames.pop_front();
        self.frames.push_back(frame);
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            info: self.info(newly),
        })
    }

    fn observation_shape(&self) -> [usize; 3] {
        let g = self.config.grid_size;
        [NAV_CHANNELS * FRAME_STACK, g, g]
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn render(&self) -> Frame {
        let g = self.config.grid_size;
        let scale = 8;
        let mut frame = Frame::new(g * scale, g * scale, Palette::UNKNOWN);
        for i in 0..g * g {
            let c = self.grid.cell(i);
            let color = if !self.explored[i] {
                Palette::UNKNOWN
            } else if self.grid.walls()[i] {
                Palette::WALL
            } else {
                Palette::FREE
            };
            frame.fill_rect(c.x * scale, c.y * scale, scale, scale, color);
        }
        if self.target_visible() {
            let color = if self.task == TaskId::FindTreasure {
                Palette::TREASURE
            } else {
                Palette::HIDER
            };
            frame.fill_rect(self.target.x * scale + 1, self.target.y * scale + 1, scale - 2, scale - 2, color);
        }
        frame.fill_rect(self.agent.x * scale + 1, self.agent.y * scale + 1, scale - 2, scale - 2, Palette::AGENT);
        frame
    }

    fn info_snapshot(&self) -> StepInfo {
        self.info(0)
    }
}

/// Fraction of grid cells ever explored.
pub fn visible_ratio(explored: &[bool]) -> f64 {
    if explored.is_empty() {
        return 0.0;
    }
    explored.iter().filter(|e| **e).count() as f64 / explored.len() as f64
}

/// One primitive tick of the heuristic hider.
///
/// With the seeker within Chebyshev `range`, the hider moves to the free
/// neighbor farthest (Euclidean) from the seeker, preferring N, E, S, W on
/// ties. Otherwise it keeps its heading and reverses on wall or boundary
/// contact. An enclosed hider stays put.
pub fn hider_step(grid: &Grid, hider: Cell, heading: Heading, seeker: Cell, range: usize) -> (Cell, Heading) {
    if hider.chebyshev(seeker) <= range {
        let mut best: Option<(Heading, Cell, f64)> = None;
        for (h, n) in grid.free_neighbors(hider) {
            let d = n.euclidean(seeker);
            if best.map_or(true, |(_, _, bd)| d > bd) {
                best = Some((h, n, d));
            }
        }
        return match best {
            Some((h, n, _)) => (n, h),
            None => (hider, heading),
        };
    }
    let ahead = grid.neighbor(hider, heading).filter(|c| grid.is_free(*c));
    if let Some(next) = ahead {
        return (next, heading);
    }
    let back = heading.reversed();
    match grid.neighbor(hider, back).filter(|c| grid.is_free(*c)) {
        Some(next) => (next, back),
        None => (hider, back),
    }
}
