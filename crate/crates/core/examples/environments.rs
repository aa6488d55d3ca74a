//! Plays one random episode of each task and saves the last frame as PNG.
//!
//! ```text
//! cargo run --release --example environments -- [out_dir]
//! ```

use std::{env, fs, path::PathBuf};

use guide::envs::{make_env, EnvConfig, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> guide::Result<()> {
    let out = env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| env::temp_dir().join("guide-envs"));
    fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for task in [TaskId::Bowling, TaskId::FindTreasure, TaskId::HideAndSeek] {
        let mut env = make_env(task, EnvConfig::default())?;
        let obs = env.reset(42)?;
        let (mut ret, mut steps) = (0.0, 0);
        let mut last = None;
        while !env.is_done() {
            let action: Vec<f64> = (0..env.action_dim()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let r = env.step(&action)?;
            ret += r.reward;
            steps += 1;
            last = Some(r.info);
        }
        let path = out.join(format!("{task}.png"));
        fs::write(&path, env.render().to_png()?)?;
        let info = last.unwrap_or_default();
        println!(
            "{task:>13}: obs {:?}, {steps} steps, return {ret:+.1}, success {}, visible {:.2}, pins {:?} -> {}",
            obs.shape,
            info.success,
            info.visible_ratio,
            info.pins_knocked,
            path.display()
        );
    }
    Ok(())
}
