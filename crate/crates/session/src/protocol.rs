//! Wire protocol: length-prefixed JSON frames over one bidirectional stream.
//!
//! Every frame is a 4-byte big-endian length followed by that many bytes of
//! UTF-8 JSON. A client frame holds one [`ClientMessage`]; the server answers
//! each client frame with exactly one frame holding a JSON array of
//! [`ServerMessage`]s, so a client can run in lockstep.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use gazeintent::control::Mode;
use gazeintent::world::{ActionKind, BoardLayout, BoardRecord, ObjectId};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;
/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ClientMessage {
    Start {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<Mode>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        version: Option<u32>,
    },
    Gaze {
        t: f64,
        x: f64,
        y: f64,
        valid: bool,
    },
    /// Pull of the trigger. `x`/`y` give the hand-held tip position when the
    /// client tracks it; otherwise the robot's own tip is used.
    Trigger {
        t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<f64>,
    },
    Rotate {
        t: f64,
    },
    SetMode {
        mode: Mode,
    },
    /// Ends the session and asks for the summary.
    End {
        t: f64,
    },
}

impl ClientMessage {
    pub fn name(&self) -> &'static str {
        match self {
            ClientMessage::Start { .. } => "Start",
            ClientMessage::Gaze { .. } => "Gaze",
            ClientMessage::Trigger { .. } => "Trigger",
            ClientMessage::Rotate { .. } => "Rotate",
            ClientMessage::SetMode { .. } => "SetMode",
            ClientMessage::End { .. } => "End",
        }
    }

    pub fn time(&self) -> Option<f64> {
        match *self {
            ClientMessage::Gaze { t, .. } | ClientMessage::Trigger { t, .. } | ClientMessage::Rotate { t } | ClientMessage::End { t } => Some(t),
            ClientMessage::Start { .. } | ClientMessage::SetMode { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionResult {
    Picked,
    Completed,
    MismatchReturnedToStock,
    /// Nothing within reach of the trigger position.
    Missed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Protocol,
    Version,
    NotStarted,
    AlreadyStarted,
    OutOfOrder,
    Busy,
    IllegalAction,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub seed: u64,
    pub mode: Mode,
    pub elapsed: f64,
    pub blocks_completed: usize,
    pub board_complete: bool,
    pub blocks_per_minute: f64,
    pub corrective_moves: usize,
    pub mismatches: usize,
    pub misses: usize,
    pub predictions: usize,
    /// SHA-256 over every server message sent before this summary.
    pub telemetry_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ServerMessage {
    Welcome { t: f64, version: u32, session_id: String, seed: u64, mode: Mode, model_hash: String, layout: BoardLayout, board: BoardRecord },
    State { t: f64, board: BoardRecord, busy_until: Option<f64> },
    Probs { t: f64, kind: ActionKind, probs: BTreeMap<ObjectId, f64>, chosen: ObjectId, decided: bool },
    Tip { t: f64, x: f64, y: f64, phase: String, committed: Option<ObjectId>, mode: Mode },
    Outcome { t: f64, action: ActionKind, target: Option<ObjectId>, result: ActionResult },
    Summary { t: f64, stats: SessionSummary },
    Ack { t: f64, of: String },
    Error { t: f64, code: ErrorCode, message: String },
}

impl ServerMessage {
    pub fn time(&self) -> f64 {
        match *self {
            ServerMessage::Welcome { t, .. }
            | ServerMessage::State { t, .. }
            | ServerMessage::Probs { t, .. }
            | ServerMessage::Tip { t, .. }
            | ServerMessage::Outcome { t, .. }
            | ServerMessage::Summary { t, .. }
            | ServerMessage::Ack { t, .. }
            | ServerMessage::Error { t, .. } => t,
        }
    }
}

/// Writes one frame.
pub fn write_frame<W: Write>(w: &mut W, body: &[u8]) -> io::Result<()> {
    if body.len() > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame too large"));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream before the header.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {n} bytes exceeds limit")));
    }
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn encode_client(msg: &ClientMessage) -> Vec<u8> {
    serde_json::to_vec(msg).expect("client message serializes")
}

pub fn encode_server(batch: &[ServerMessage]) -> Vec<u8> {
    serde_json::to_vec(batch).expect("server message serializes")
}

pub fn decode_client(body: &[u8]) -> Result<ClientMessage, String> {
    let msg: ClientMessage = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    let finite = match &msg {
        ClientMessage::Gaze { t, x, y, .. } => t.is_finite() && x.is_finite() && y.is_finite(),
        ClientMessage::Trigger { t, x, y } => t.is_finite() && x.is_none_or(f64::is_finite) && y.is_none_or(f64::is_finite),
        ClientMessage::Rotate { t } | ClientMessage::End { t } => t.is_finite(),
        _ => true,
    };
    if finite {
        Ok(msg)
    } else {
        Err("non-finite number".into())
    }
}

pub fn decode_server(body: &[u8]) -> Result<Vec<ServerMessage>, String> {
    serde_json::from_slice(body).map_err(|e| e.to_string())
}
