use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use guide::agents::AgentKind;
use guide::envs::TaskId;
use guide::eval::{analyze, evaluate_checkpoint};
use guide::session::{run_session, run_session_with_gateway, Budget, FeedbackMode, Gateway, SessionConfig, SessionReport};
use guide::{Error, Result};

#[derive(Parser)]
#[command(name = "guide", version, about = "Real-time human-guided reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a two-phase session with scripted or no feedback.
    Train {
        #[arg(long)]
        env: TaskId,
        #[arg(long)]
        agent: AgentKind,
        /// scripted | none (human sessions go through `serve`)
        #[arg(long, default_value = "scripted")]
        feedback: FeedbackMode,
        /// Decision steps ("2000") or wall time ("600s", "10m").
        #[arg(long)]
        phase1: Budget,
        #[arg(long)]
        phase2: Budget,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Base configuration; the flags above override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        eval_interval: Option<Budget>,
        #[arg(long)]
        eval_episodes: Option<usize>,
    },
    /// Evaluate a checkpoint on held-out layouts.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Wait for a trainer on a WebSocket port and run the configured session.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Summarize session directories into CSV reports.
    Analyze {
        metrics: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

fn print_report(report: &SessionReport) {
    println!(
        "session {}: {} + {} steps, {} episodes",
        report.session_id, report.phase1_steps, report.phase2_steps, report.episodes
    );
    if let Some(last) = report.final_metric() {
        println!("final {} = {:.4} ({})", last.metric, last.value, last.checkpoint);
    }
    if let Some(reason) = &report.aborted {
        println!("aborted: {reason}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            env,
            agent,
            feedback,
            phase1,
            phase2,
            seed,
            out,
            config,
            eval_interval,
            eval_episodes,
        } => {
            if feedback == FeedbackMode::Human {
                return Err(Error::Usage("human feedback needs a trainer: use `guide serve`".into()));
            }
            let mut c = match config {
                Some(path) => SessionConfig::load(&path)?,
                None => SessionConfig::default(),
            };
            c.env = env;
            c.agent = agent;
            c.feedback = feedback;
            c.phase1 = phase1;
            c.phase2 = phase2;
            c.seed = seed;
            c.out_dir = out;
            if eval_interval.is_some() {
                c.eval_interval = eval_interval;
            }
            if let Some(n) = eval_episodes {
                c.eval_episodes = n;
            }
            print_report(&run_session(c)?);
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let result = evaluate_checkpoint(&checkpoint, episodes, seed)?;
            let (metric, value) = result.metric();
            println!("{metric} = {value:.4} over {} episodes", result.episodes);
            println!("{}", serde_json::to_string(&result)?);
        }
        Command::Serve { port, config, host } => {
            let c = SessionConfig::load(&config)?;
            let gateway = Gateway::bind(&format!("{host}:{port}"))?;
            println!("waiting for a trainer on ws://{}", gateway.local_addr());
            print_report(&run_session_with_gateway(c, gateway)?);
        }
        Command::Analyze { metrics, report } => {
            let a = analyze(&metrics, &report)?;
            println!("{} runs -> {}", a.runs, a.learning_curve.display());
            if let Some(p) = &a.exploration_curve {
                println!("exploration -> {}", p.display());
            }
            println!("milestones -> {}", a.milestones.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
