//! A GUIDE session fed by a trainer over the WebSocket gateway. The
//! "trainer" here is a thread that answers every frame with the same
//! encouragement and takes a short break halfway through.
//!
//! ```text
//! cargo run --release --example live_trainer
//! ```
//!
//! To drive a session by hand, run `guide serve` and connect the web client
//! instead.

use std::net::SocketAddr;
use std::thread;
use std::time::Duration;

use guide::agents::AgentKind;
use guide::envs::TaskId;
use guide::grounding::GroundingConfig;
use guide::session::{
    run_session_with_gateway, Budget, ClientMessage, ControlAction, FeedbackMode, Gateway, ServerMessage,
    SessionConfig,
};
use tungstenite::Message;

fn trainer(addr: SocketAddr) {
    let (mut ws, _) = tungstenite::connect(format!("ws://{addr}")).expect("gateway is listening");
    let send = |ws: &mut tungstenite::WebSocket<_>, m: ClientMessage| ws.send(Message::Text(m.encode()));
    send(&mut ws, ClientMessage::Control { action: ControlAction::Start, mode: None }).unwrap();
    let mut frames = 0;
    while let Ok(msg) = ws.read() {
        let Message::Text(text) = msg else { continue };
        match ServerMessage::decode(&text) {
            Ok(ServerMessage::Frame { step, phase, .. }) => {
                frames += 1;
                if phase.as_str() == "guidance" && send(&mut ws, ClientMessage::Feedback { value: 0.5 }).is_err() {
                    break;
                }
                if frames == 50 {
                    println!("trainer: pausing at step {step}");
                    send(&mut ws, ClientMessage::Control { action: ControlAction::Pause, mode: None }).unwrap();
                    thread::sleep(Duration::from_millis(300));
                    send(&mut ws, ClientMessage::Control { action: ControlAction::Resume, mode: None }).unwrap();
                }
            }
            Ok(ServerMessage::Stats { .. }) => {}
            Err(e) => eprintln!("trainer: bad message: {e}"),
        }
    }
    println!("trainer: saw {frames} frames");
}

fn main() -> guide::Result<()> {
    let gateway = Gateway::bind("127.0.0.1:0")?;
    let addr = gateway.local_addr();
    println!("gateway on ws://{addr}");
    let client = thread::spawn(move || trainer(addr));

    let config = SessionConfig {
        env: TaskId::FindTreasure,
        agent: AgentKind::GuideDdpg,
        feedback: FeedbackMode::Human,
        phase1: Budget::Steps(120),
        phase2: Budget::Steps(60),
        eval_episodes: 5,
        // a brisk pace so the example finishes quickly
        step_seconds: Some(0.02),
        grounding: Some(GroundingConfig { delay: 0.04, ..GroundingConfig::for_task(TaskId::FindTreasure) }),
        out_dir: std::env::temp_dir().join("guide-live"),
        ..SessionConfig::default()
    };
    let report = run_session_with_gateway(config, gateway)?;
    client.join().expect("trainer thread");
    println!(
        "{} guided + {} automated steps, {} simulator rounds, aborted: {:?}",
        report.phase1_steps, report.phase2_steps, report.simulator_rounds, report.aborted
    );
    Ok(())
}
