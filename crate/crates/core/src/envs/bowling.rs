use serde::{Deserialize, Serialize};

use super::render::{Frame, Palette};
use super::{EnvConfig, Environment, Observation, StepInfo, StepResult, TaskId};
use crate::error::{Error, Result};

pub const ROLLS_PER_GAME: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinRow {
    /// Longitudinal position along the lane.
    pub y: f64,
    /// Lateral positions in lane units, `[0, 1]`.
    pub xs: Vec<f64>,
}

/// Deterministic lane model. The ball travels straight until the steer
/// distance, then follows a parabola with curvature set by the third action
/// component. A ball that leaves `[0, 1]` laterally is in the gutter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BowlingConfig {
    pub lane_length: f64,
    pub kappa_max: f64,
    pub hit_radius: f64,
    pub pin_rows: Vec<PinRow>,
}

impl Default for BowlingConfig {
    fn default() -> Self {
        BowlingConfig {
            lane_length: 10.0,
            kappa_max: 0.05,
            hit_radius: 0.06,
            pin_rows: vec![
                PinRow { y: 8.5, xs: vec![0.5] },
                PinRow { y: 8.8, xs: vec![0.44, 0.56] },
                PinRow { y: 9.1, xs: vec![0.38, 0.5, 0.62] },
                PinRow { y: 9.4, xs: vec![0.32, 0.44, 0.56, 0.68] },
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub x: f64,
    pub y: f64,
    pub standing: bool,
}

/// Ball trajectory decoded from a `[0,1]³` action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Roll {
    pub x0: f64,
    pub steer_start: f64,
    pub curvature: f64,
}

impl Roll {
    pub fn from_action(action: &[f64], cfg: &BowlingConfig) -> Roll {
        let a: Vec<f64> = action.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Roll {
            x0: a[0],
            steer_start: cfg.lane_length * a[1],
            curvature: cfg.kappa_max * (2.0 * a[2] - 1.0),
        }
    }

    pub fn lateral(&self, y: f64) -> f64 {
        if y < self.steer_start {
            self.x0
        } else {
            let d = y - self.steer_start;
            self.x0 + 0.5 * self.curvature * d * d
        }
    }

    /// Whether the ball is still on the lane at longitudinal position `y`.
    /// The lateral position is monotone in `y`, so checking both ends of
    /// `[0, y]` covers the whole segment.
    pub fn in_lane(&self, y: f64) -> bool {
        let inside = |x: f64| (0.0..=1.0).contains(&x);
        inside(self.x0) && inside(self.lateral(y))
    }
}

/// Pins knocked by one roll against a full rack; returns the per-pin mask in
/// rack order.
pub fn roll_ball(action: &[f64], cfg: &BowlingConfig) -> Vec<bool> {
    let roll = Roll::from_action(action, cfg);
    rack(cfg)
        .iter()
        .map(|p| roll.in_lane(p.y) && (roll.lateral(p.y) - p.x).abs() < cfg.hit_radius)
        .collect()
}

pub fn rack(cfg: &BowlingConfig) -> Vec<Pin> {
    cfg.pin_rows
        .iter()
        .flat_map(|row| {
            row.xs.iter().map(move |&x| Pin {
                x,
                y: row.y,
                standing: true,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BowlingEnv {
    config: EnvConfig,
    roll: usize,
    pins: Vec<Pin>,
    last_roll: Option<Roll>,
    score: u32,
    done: bool,
}

impl BowlingEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let pins = rack(&config.bowling);
        Ok(BowlingEnv {
            config,
            roll: 0,
            pins,
            last_roll: None,
            score: 0,
            done: true,
        })
    }

    pub fn score(&self) -> u32 {
        self.score
    }

    pub fn roll_index(&self) -> usize {
        self.roll
    }

    pub fn pins(&self) -> &[Pin] {
        &self.pins
    }

    fn lane_cell(&self, x: f64, y: f64) -> (usize, usize) {
        let g = self.config.grid_size;
        let col = ((x * g as f64).floor().max(0.0) as usize).min(g - 1);
        let row_from_start = ((y / self.config.bowling.lane_length) * g as f64).floor().max(0.0) as usize;
        (col, g - 1 - row_from_start.min(g - 1))
    }

    fn observation(&self) -> Observation {
        let g = self.config.grid_size;
        let mut data = vec![0.25; g * g];
        if let Some(roll) = self.last_roll {
            let samples = 4 * g;
            for i in 0..=samples {
                let y = self.config.bowling.lane_length * i as f64 / samples as f64;
                if !roll.in_lane(y) {
                    break;
                }
                let (c, r) = self.lane_cell(roll.lateral(y), y);
                data[r * g + c] = 0.6;
            }
        }
        for p in self.pins.iter().filter(|p| p.standing) {
            let (c, r) = self.lane_cell(p.x, p.y);
            data[r * g + c] = 1.0;
        }
        Observation { shape: [1, g, g], data }
    }
}

impl Environment for BowlingEnv {
    fn task(&self) -> TaskId {
        TaskId::Bowling
    }

    fn config(&self) -> &EnvConfig {
        &self.config
    }

    fn reset(&mut self, _seed: u64) -> Result<Observation> {
        self.roll = 0;
        self.score = 0;
        self.pins = rack(&self.config.bowling);
        self.last_roll = None;
        self.done = false;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("all rolls of this game are used".into()));
        }
        if action.len() != 3 {
            return Err(Error::shape(&[3], &[action.len()]));
        }
        let cfg = &self.config.bowling;
        let knocked = roll_ball(action, cfg);
        let count = knocked.iter().filter(|k| **k).count() as u32;
        self.pins = rack(cfg);
        for (p, k) in self.pins.iter_mut().zip(&knocked) {
            p.standing = !k;
        }
        self.last_roll = Some(Roll::from_action(action, cfg));
        self.score += count;
        self.roll += 1;
        self.done = self.roll >= ROLLS_PER_GAME;
        let observation = self.observation();
        // the next roll always starts from a full rack
        Ok(StepResult {
            observation,
            reward: count as f64,
            done: self.done,
            info: StepInfo {
                pins_knocked: Some(count),
                ..StepInfo::default()
            },
        })
    }

    fn observation_shape(&self) -> [usize; 3] {
        [1, self.config.grid_size, self.config.grid_size]
    }

    fn action_dim(&self) -> usize {
        3
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn render(&self) -> Frame {
        let (w, h) = (64usize, 160usize);
        let len = self.config.bowling.lane_length;
        let to_px = |x: f64, y: f64| -> (usize, usize) {
            let px = (x * w as f64).floor().clamp(0.0, (w - 1) as f64) as usize;
            let py = (h - 1) - ((y / len) * h as f64).floor().clamp(0.0, (h - 1) as f64) as usize;
            (px, py)
        };
        let mut frame = Frame::new(w, h, Palette::LANE);
        if let Some(roll) = self.last_roll {
            for i in 0..=4 * h {
                let y = len * i as f64 / (4 * h) as f64;
                if !roll.in_lane(y) {
                    break;
                }
                let (px, py) = to_px(roll.lateral(y), y);
                frame.set(px, py, Palette::BALL_PATH);
            }
        }
        for p in self.pins.iter().filter(|p| p.standing) {
            let (px, py) = to_px(p.x, p.y);
            frame.fill_rect(px.saturating_sub(1), py.saturating_sub(1), 3, 3, Palette::PIN);
        }
        frame
    }

    fn info_snapshot(&self) -> StepInfo {
        StepInfo::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> BowlingConfig {
        BowlingConfig::default()
    }

    /// Closed-form check of `|x(y_p) − x_p| < r_hit` for a straight roll.
    fn straight_oracle(x0: f64) -> usize {
        let c = cfg();
        c.pin_rows
            .iter()
            .flat_map(|r| r.xs.iter())
            .filter(|&&x| (x0 - x).abs() < c.hit_radius)
            .count()
    }

    #[test]
    fn straight_center_roll_hits_two_pins() {
        let knocked = roll_ball(&[0.5, 1.0, 0.5], &cfg());
        assert_eq!(knocked.iter().filter(|k| **k).count(), 2);
        assert_eq!(straight_oracle(0.5), 2);
        // the head pin and the middle pin of the third row
        assert!(knocked[0] && knocked[4]);
    }

    #[test]
    fn edge_roll_misses() {
        assert_eq!(straight_oracle(0.0), 0);
        assert!(roll_ball(&[0.0, 0.0, 0.5], &cfg()).iter().all(|k| !k));
    }

    #[test]
    fn early_hook_goes_into_gutter() {
        // full left curvature from the foul line leaves the lane long before the pins
        let roll = Roll::from_action(&[0.5, 0.0, 0.0], &cfg());
        assert!(!roll.in_lane(8.5));
        assert!(roll_ball(&[0.5, 0.0, 0.0], &cfg()).iter().all(|k| !k));
    }

    #[test]
    fn game_accounting() {
        let mut env = BowlingEnv::new(EnvConfig::default()).unwrap();
        env.reset(0).unwrap();
        let mut total = 0.0;
        for i in 0..ROLLS_PER_GAME {
            let r = env.step(&[0.5, 1.0, 0.5]).unwrap();
            assert_eq!(r.reward, 2.0);
            total += r.reward;
            assert_eq!(r.done, i + 1 == ROLLS_PER_GAME);
        }
        assert_eq!(env.score() as f64, total);
        assert!(env.step(&[0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn knocked_pins_absent_from_render() {
        let mut env = BowlingEnv::new(EnvConfig::default()).unwrap();
        env.reset(0).unwrap();
        let before = env.render();
        env.step(&[0.5, 1.0, 0.5]).unwrap();
        let after = env.render();
        assert_eq!(after, env.render());
        // head pin at (0.5, 8.5)
        let (px, py) = (32, 159 - 136);
        assert_eq!(before.pixel(px, py), Palette::PIN);
        assert_ne!(after.pixel(px, py), Palette::PIN);
    }
}
