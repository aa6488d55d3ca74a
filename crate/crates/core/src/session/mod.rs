//! Session orchestration: the two-phase protocol, evaluation schedule,
//! checkpoints and logs, plus the trainer gateway and its wire protocol.

mod config;
mod gateway;
mod protocol;
mod runner;

pub use config::{Budget, FeedbackMode, Phase2Reward, SessionConfig};
pub use gateway::{Gateway, GatewayEvent};
pub use protocol::{ClientMessage, ControlAction, InputMode, ServerMessage, PROTOCOL_VERSION};
pub use runner::{restore_agent, run_session, run_session_with_gateway, Session, SessionClock, SessionReport};
