//! Shows what the scripted trainer says about a random Find Treasure
//! episode, with and without perturbation.
//!
//! ```text
//! cargo run --example scripted_trainer
//! ```

use guide::envs::{make_env, EnvConfig, TaskId};
use guide::scripted::{ScriptedConfig, ScriptedTrainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> guide::Result<()> {
    let config = EnvConfig::default();
    let mut env = make_env(TaskId::FindTreasure, config.clone())?;
    let mut clean = ScriptedTrainer::new(TaskId::FindTreasure, config.grid_size, 1.0, ScriptedConfig::default())?;
    let noisy_config = ScriptedConfig { noise_std: 0.2, drop_prob: 0.2, delay_jitter: 0.3, seed: 3, ..ScriptedConfig::default() };
    let mut noisy = ScriptedTrainer::new(TaskId::FindTreasure, config.grid_size, 1.0, noisy_config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    env.reset(11)?;
    let mut t = 0.0;
    while !env.is_done() {
        let r = env.step(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])?;
        let a = clean.feedback(&r.info, t).expect("unperturbed trainer never drops");
        let b = noisy.feedback(&r.info, t);
        println!(
            "t {t:4.1}  new cells {:2}  target visible {:5}  scripted {:+.2} at {:.1} s  noisy {}",
            r.info.newly_explored_cells,
            r.info.target_visible,
            a.value,
            a.t_wall,
            b.map_or("dropped".to_string(), |s| format!("{:+.2} at {:.2} s", s.value, s.t_wall)),
        );
        t += 1.0;
    }
    Ok(())
}
