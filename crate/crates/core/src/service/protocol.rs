use serde::{Deserialize, Serialize};

use crate::engine::DecisionEvent;
use crate::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

/// One line of the wire protocol.
///
/// ```json
/// {"v":1,"session_id":"s1","type":"set_controls","c_bc":0.6,"c_tc":0.2}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub v: u32,
    pub session_id: String,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    SessionOpen {},
    SessionClose {},
    WordEvent {
        speaker: String,
        word: String,
        start_ms: u64,
        end_ms: u64,
    },
    SetControls {
        c_bc: f64,
        c_tc: f64,
    },
    ControlsAck {
        c_bc: f64,
        c_tc: f64,
    },
    Decision(DecisionEvent),
    Error {
        message: String,
    },
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::SessionOpen {} => "session_open",
            Body::SessionClose {} => "session_close",
            Body::WordEvent { .. } => "word_event",
            Body::SetControls { .. } => "set_controls",
            Body::ControlsAck { .. } => "controls_ack",
            Body::Decision(_) => "decision",
            Body::Error { .. } => "error",
        }
    }
}

impl WireMessage {
    pub fn new(session_id: impl Into<String>, body: Body) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            session_id: session_id.into(),
            body,
        }
    }

    pub fn error(session_id: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(session_id, Body::Error { message: message.into() })
    }

    /// Single line, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim()).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })
    }
}
