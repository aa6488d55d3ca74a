pub mod agents;
pub mod envs;
pub mod error;
pub mod eval;
pub mod grounding;
pub mod nn;
pub mod scripted;
pub mod session;
pub mod simulator;

pub use error::{Error, Result};
