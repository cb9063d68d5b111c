//! Session logs: a JSONL header, every client message in arrival order, and
//! a trailer with the hash of everything the server sent back.

use std::io::{BufRead, Write};
use std::sync::Arc;

use gazeintent::control::Mode;
use gazeintent::intent::IntentModels;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ClientMessage, ServerMessage, SessionSummary};
use crate::session::{Connection, SessionConfig};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("unsupported log version {0}")]
    Version(u32),
    #[error("refused: log was recorded with model {recorded}, got {supplied}")]
    Refused { recorded: String, supplied: String },
    #[error("corrupt log: {0}")]
    Corrupt(String),
    #[error("replay diverged: recorded hash {recorded}, replayed {replayed}")]
    Diverged { recorded: String, replayed: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub log_version: u32,
    pub protocol_version: u32,
    pub seed: u64,
    pub mode: Mode,
    pub model_hash: String,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogTrailer {
    pub inputs: usize,
    pub outputs: usize,
    pub telemetry_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub inputs: Vec<ClientMessage>,
    pub trailer: LogTrailer,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrailerLine {
    trailer: LogTrailer,
}

impl SessionLog {
    /// Snapshot of a connection; `None` until a session has started.
    pub fn from_connection(conn: &Connection) -> Option<SessionLog> {
        let s = conn.session()?;
        let mode = conn
            .inputs()
            .iter()
            .find_map(|m| match m {
                ClientMessage::Start { mode, .. } => Some(mode.unwrap_or(conn.config().default_mode)),
                _ => None,
            })
            .unwrap_or(s.mode);
        Some(SessionLog {
            header: LogHeader {
                log_version: LOG_VERSION,
                protocol_version: crate::protocol::PROTOCOL_VERSION,
                seed: s.seed,
                mode,
                model_hash: conn.model_hash(),
                config: conn.config().clone(),
            },
            inputs: conn.inputs().to_vec(),
            trailer: LogTrailer { inputs: conn.inputs().len(), outputs: conn.messages_sent(), telemetry_hash: conn.telemetry_hash() },
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for m in &self.inputs {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &TrailerLine { trailer: self.trailer.clone() })?;
        w.write_all(b"\n")?;
        w.flush()
    }

    pub fn read<R: BufRead>(r: R) -> Result<SessionLog, LogError> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| LogError::Corrupt("empty log".into()))??;
        let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| LogError::Corrupt(format!("header: {e}")))?;
        let version = raw.get("log_version").and_then(serde_json::Value::as_u64);
        match version {
            Some(v) if v == LOG_VERSION as u64 => {}
            Some(v) => return Err(LogError::Version(v as u32)),
            None => return Err(LogError::Corrupt("header without log_version".into())),
        }
        let header: LogHeader = serde_json::from_value(raw).map_err(|e| LogError::Corrupt(format!("header: {e}")))?;
        let mut inputs = Vec::new();
        let mut trailer = None;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if trailer.is_some() {
                return Err(LogError::Corrupt(format!("data after trailer at line {}", i + 2)));
            }
            if line.starts_with("{\"trailer\"") {
                let t: TrailerLine = serde_json::from_str(&line).map_err(|e| LogError::Corrupt(format!("trailer: {e}")))?;
                trailer = Some(t.trailer);
            } else {
                let m: ClientMessage = serde_json::from_str(&line).map_err(|e| LogError::Corrupt(format!("line {}: {e}", i + 2)))?;
                inputs.push(m);
            }
        }
        let trailer = trailer.ok_or_else(|| LogError::Corrupt("missing trailer (truncated log?)".into()))?;
        if trailer.inputs != inputs.len() {
            return Err(LogError::Corrupt(format!("trailer counts {} messages, found {}", trailer.inputs, inputs.len())));
        }
        Ok(SessionLog { header, inputs, trailer })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub messages: Vec<ServerMessage>,
    pub telemetry_hash: String,
    /// The last summary sent during the session, or one computed at its end.
    pub summary: SessionSummary,
}

/// Re-runs a recorded session and checks it reproduces the recorded stream.
pub fn replay(log: &SessionLog, models: Arc<IntentModels>) -> Result<Replay, LogError> {
    let supplied = models.hash();
    if supplied != log.header.model_hash {
        return Err(LogError::Refused { recorded: log.header.model_hash.clone(), supplied });
    }
    let mut conn = Connection::new(models, log.header.config.clone());
    let mut messages = Vec::new();
    for m in &log.inputs {
        messages.extend(conn.handle(m.clone()));
    }
    let telemetry_hash = conn.telemetry_hash();
    if telemetry_hash != log.trailer.telemetry_hash || messages.len() != log.trailer.outputs {
        return Err(LogError::Diverged { recorded: log.trailer.telemetry_hash.clone(), replayed: telemetry_hash });
    }
    let summary = messages
        .iter()
        .rev()
        .find_map(|m| match m {
            ServerMessage::Summary { stats, .. } => Some(stats.clone()),
            _ => None,
        })
        .or_else(|| conn.session().map(|s| s.summary(&Default::default())))
        .ok_or_else(|| LogError::Corrupt("log never starts a session".into()))?;
    Ok(Replay { messages, telemetry_hash, summary })
}
