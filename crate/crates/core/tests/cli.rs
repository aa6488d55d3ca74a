use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
eval_episodes = 5

[env_params]
grid_size = 8

[agent_params]
hidden = 16
depth = 2
warmup = 10

[simulator]
encoder = "mlp"
hidden = 16
train_every = 1
"#;

fn guide(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guide"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn train(dir: &Path, out: &str, seed: &str) -> Output {
    let config = dir.join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    guide(&[
        "train",
        "--env", "find_treasure",
        "--agent", "guide_ddpg",
        "--feedback", "scripted",
        "--phase1", "60",
        "--phase2", "60",
        "--seed", seed,
        "--out", dir.join(out).to_str().unwrap(),
        "--config", config.to_str().unwrap(),
        "--eval-interval", "40",
    ])
}

#[test]
fn train_is_reproducible_and_feeds_eval_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    for (out, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let o = train(dir.path(), out, seed);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("60 + 60 steps"));
    }
    let read = |run: &str| std::fs::read(dir.path().join(run).join("metrics.jsonl")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(String::from_utf8(read("a")).unwrap().lines().count(), 3);

    let ckpt = dir.path().join("a/checkpoints/step_00000120.ckpt");
    let o = guide(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "7", "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("success_rate = "), "{stdout}");
    assert!(stdout.contains("over 7 episodes"));

    let report = dir.path().join("report/curves.csv");
    let o = guide(&["analyze", dir.path().to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
    assert!(dir.path().join("report/curves_exploration.csv").exists());
    assert!(dir.path().join("report/curves_milestones.csv").exists());
}

#[test]
fn usage_errors_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    for args in [
        vec!["train", "--env", "chess", "--agent", "ddpg", "--phase1", "10", "--phase2", "10", "--out", out],
        vec!["train", "--env", "bowling", "--agent", "ddpg", "--phase1", "10", "--phase2", "10s", "--out", out],
        vec!["train", "--env", "bowling", "--agent", "guide_ddpg", "--feedback", "human", "--phase1", "10", "--phase2", "10", "--out", out],
        vec!["eval", "--checkpoint", "/nonexistent.ckpt"],
    ] {
        let o = guide(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!String::from_utf8_lossy(&o.stderr).contains("panicked"), "{args:?}");
    }
}
