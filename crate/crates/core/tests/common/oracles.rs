//! Reference computations written independently of the library code.

use guide::envs::{BowlingConfig, EnvConfig, Environment, NavEnv, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Pins knocked by a roll, by direct geometry: the ball path is sampled
/// densely along the lane and must stay inside `[0, 1]` up to each pin row.
pub fn bowling_pins(action: &[f64], cfg: &BowlingConfig) -> u32 {
    let a: Vec<f64> = action.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let x0 = a[0];
    let s = a[1] * cfg.lane_length;
    let kappa = cfg.kappa_max * (2.0 * a[2] - 1.0);
    let x_at = |y: f64| {
        let d = (y - s).max(0.0);
        x0 + kappa * d * d / 2.0
    };
    let mut knocked = 0;
    for row in &cfg.pin_rows {
        // a parabola opening away from the start is monotone past the
        // steer point, so the end points bound the path
        let on_lane = (0.0..=1.0).contains(&x0) && (0.0..=1.0).contains(&x_at(row.y));
        for &px in &row.xs {
            if on_lane && (x_at(row.y) - px).abs() < cfg.hit_radius {
                knocked += 1;
            }
        }
    }
    knocked
}

/// Game score of a sequence of rolls; every roll faces a full rack.
pub fn bowling_score(actions: &[Vec<f64>], cfg: &BowlingConfig) -> u32 {
    actions.iter().map(|a| bowling_pins(a, cfg)).sum()
}

/// Mean score of uniformly random games.
pub fn random_bowling_baseline(games: usize, seed: u64) -> f64 {
    let cfg = BowlingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: u32 = (0..games)
        .map(|_| {
            let rolls: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
            bowling_score(&rolls, &cfg)
        })
        .sum();
    total as f64 / games as f64
}

#[derive(Debug, Default)]
pub struct AccountingReport {
    pub episodes: usize,
    pub return_mismatches: usize,
    pub non_monotone: usize,
    pub successes: usize,
    /// Digest over every observation, reward and flag of the run.
    pub digest: [u8; 32],
}

/// Runs random-action episodes on a navigation task, checking the reward
/// identity and explored-mask monotonicity step by step.
pub fn nav_accounting(task: TaskId, episodes: usize, seed: u64) -> AccountingReport {
    let cfg = EnvConfig::default();
    let mut env = NavEnv::new(task, cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hasher = Sha256::new();
    let mut report = AccountingReport::default();
    for ep in 0..episodes {
        let obs = env.reset(seed.wrapping_mul(7919).wrapping_add(ep as u64)).unwrap();
        for v in &obs.data {
            hasher.update(v.to_le_bytes());
        }
        let mut explored = env.explored().to_vec();
        let (mut ret, mut steps, mut success) = (0.0, 0usize, false);
        loop {
            let action = [rng.gen::<f64>(), rng.gen::<f64>()];
            let res = env.step(&action).unwrap();
            ret += res.reward;
            steps += 1;
            success |= res.info.success;
            let now = env.explored();
            if explored.iter().zip(now).any(|(before, after)| *before && !*after) {
                report.non_monotone += 1;
            }
            explored = now.to_vec();
            for v in &res.observation.data {
                hasher.update(v.to_le_bytes());
            }
            hasher.update(res.reward.to_le_bytes());
            hasher.update([res.done as u8, res.info.success as u8]);
            if res.done {
                break;
            }
        }
        let expected = 10.0 * (success as u8 as f64) - steps as f64;
        if ret != expected {
            report.return_mismatches += 1;
        }
        report.successes += success as usize;
        report.episodes += 1;
    }
    report.digest = hasher.finalize().into();
    report
}

pub fn sha256_file(path: &std::path::Path) -> [u8; 32] {
    Sha256::digest(std::fs::read(path).unwrap()).into()
}

/// Drives a Bowling environment with random rolls and compares every game
/// score with [`bowling_score`]. Returns `(games, mismatches)`.
pub fn bowling_accounting(games: usize, seed: u64) -> (usize, usize) {
    let cfg = EnvConfig::default();
    let mut env = guide::envs::make_env(TaskId::Bowling, cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for g in 0..games {
        env.reset(g as u64).unwrap();
        let mut rolls = Vec::new();
        let mut score = 0.0;
        loop {
            // some rolls start outside the lane to exercise the gutter
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.1..1.1)).collect();
            let res = env.step(&a).unwrap();
            score += res.reward;
            rolls.push(a);
            if res.done {
                break;
            }
        }
        if score != bowling_score(&rolls, &cfg.bowling) as f64 || rolls.len() != 10 {
            mismatches += 1;
        }
    }
    (games, mismatches)
}
