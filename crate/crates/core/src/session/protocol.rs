//! Wire messages: one JSON object per WebSocket text frame, discriminated by
//! `"type"`. Field-by-field reference in `docs/protocol.md`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{Session, StateSnapshot};
use crate::config::Config;
use crate::scenarios::{Scenario, ScenarioEvent};
use crate::tracking::HandFrame;

/// Frames larger than this close the connection.
pub const MAX_FRAME_BYTES: usize = 64 * 1024;

const CLIENT_TYPES: [&str; 4] = ["hand", "scenario", "config_get", "reset"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioAction {
    Load,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hand(HandFrame),
    Scenario {
        action: ScenarioAction,
        /// Built-in scene name.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        /// Inline scene document; takes precedence over `name`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scene: Option<Scenario>,
    },
    ConfigGet {},
    Reset {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(StateSnapshot),
    Event(ScenarioEvent),
    Error { reason: String },
    Config(Box<Config>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("unknown type: {0:?}")]
    UnknownType(String),
    #[error("frame too large: {0} bytes (limit {MAX_FRAME_BYTES})")]
    Oversized(usize),
}

pub fn decode_client(bytes: &[u8]) -> Result<ClientMessage, ProtocolError> {
    if bytes.len() > MAX_FRAME_BYTES {
        return Err(ProtocolError::Oversized(bytes.len()));
    }
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let ty = value
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| ProtocolError::Malformed("missing string field \"type\"".into()))?;
    if !CLIENT_TYPES.contains(&ty) {
        return Err(ProtocolError::UnknownType(ty.to_string()));
    }
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

pub fn encode_server(msg: &ServerMessage) -> String {
    serde_json::to_string(msg).expect("server messages serialize")
}

/// Replies to one inbound frame, and whether the connection must close.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HandleOutcome {
    pub replies: Vec<ServerMessage>,
    pub close: bool,
}

impl HandleOutcome {
    fn reply(msg: ServerMessage) -> Self {
        Self {
            replies: vec![msg],
            close: false,
        }
    }

    fn error(reason: impl ToString) -> Self {
        Self::reply(ServerMessage::Error {
            reason: reason.to_string(),
        })
    }
}

impl Session {
    /// Decodes and applies one inbound frame. Hand frames keep their own
    /// timestamps. Every input is validated before any state changes.
    pub fn handle_message(&mut self, bytes: &[u8]) -> HandleOutcome {
        match decode_client(bytes) {
            Ok(msg) => self.apply(msg),
            Err(e) => {
                self.diagnostics.malformed_messages += 1;
                let mut out = HandleOutcome::error(&e);
                out.close = matches!(e, ProtocolError::Oversized(_));
                out
            }
        }
    }

    /// Applies an already decoded message.
    pub fn apply(&mut self, msg: ClientMessage) -> HandleOutcome {
        match msg {
            ClientMessage::Hand(frame) => match self.push_frame(frame) {
                Ok(()) => HandleOutcome::default(),
                Err(e) => HandleOutcome::error(e),
            },
            ClientMessage::Scenario { action, name, scene } => match action {
                ScenarioAction::Stop => {
                    self.stop_scenario();
                    HandleOutcome::default()
                }
                ScenarioAction::Load => {
                    let scene = match (scene, name) {
                        (Some(s), _) => s.validate().map(|()| s),
                        (None, Some(n)) => Scenario::builtin(&n),
                        (None, None) => return HandleOutcome::error("malformed: scenario load needs \"name\" or \"scene\""),
                    };
                    match scene.map_err(super::SessionError::from).and_then(|s| self.load_scenario(s)) {
                        Ok(()) => HandleOutcome::default(),
                        Err(e) => HandleOutcome::error(e),
                    }
                }
            },
            ClientMessage::ConfigGet {} => HandleOutcome::reply(ServerMessage::Config(Box::new(self.config.clone()))),
            ClientMessage::Reset { seed } => {
                let mut config = self.config.clone();
                config.seed = seed;
                let diagnostics = self.diagnostics;
                match Session::new(config) {
                    Ok(fresh) => {
                        *self = fresh;
                        self.diagnostics = diagnostics;
                        HandleOutcome::default()
                    }
                    Err(e) => HandleOutcome::error(e),
                }
            }
        }
    }
}
