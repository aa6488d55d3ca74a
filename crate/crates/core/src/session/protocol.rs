//! The `guide/1` wire protocol between the session and the trainer UI.
//!
//! Every message is a JSON object with a `version` field and a `type` tag.
//! The server sends `frame` and `stats`; the client sends `feedback` and
//! `control`. Feedback carries only a value: the server stamps it on
//! receipt with the session clock.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Phase;

pub const PROTOCOL_VERSION: &str = "guide/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame {
        session_id: String,
        step: u64,
        /// Base64-encoded PNG.
        image: String,
        phase: Phase,
        last_reward: f64,
    },
    Stats {
        episode_return: f64,
        /// Fraction of training episodes so far that succeeded.
        success_rate: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    Start,
    Pause,
    Resume,
    Mode,
}

/// Input style selected in the UI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Continuous,
    Discrete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Feedback {
        value: f64,
    },
    Control {
        action: ControlAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<InputMode>,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    version: String,
    #[serde(flatten)]
    body: T,
}

fn encode<T: Serialize>(body: T) -> String {
    serde_json::to_string(&Envelope {
        version: PROTOCOL_VERSION.to_string(),
        body,
    })
    .expect("protocol messages serialize")
}

fn decode<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let env: Envelope<T> =
        serde_json::from_str(text).map_err(|e| Error::Protocol(format!("malformed message: {e}")))?;
    if env.version != PROTOCOL_VERSION {
        return Err(Error::Protocol(format!(
            "unsupported protocol version '{}'",
            env.version
        )));
    }
    Ok(env.body)
}

impl ServerMessage {
    pub fn encode(&self) -> String {
        encode(self)
    }

    pub fn decode(text: &str) -> Result<Self> {
        decode(text)
    }
}

impl ClientMessage {
    pub fn encode(&self) -> String {
        encode(self)
    }

    pub fn decode(text: &str) -> Result<Self> {
        let msg: ClientMessage = decode(text)?;
        if let ClientMessage::Feedback { value } = msg {
            if !value.is_finite() {
                return Err(Error::Protocol("feedback value must be finite".into()));
            }
        }
        Ok(msg)
    }
}
