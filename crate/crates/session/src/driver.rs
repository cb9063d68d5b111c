//! Drives a session with the synthetic user: its gaze stream, rotations and
//! trigger pulls at the true targets, in time order.

use std::io;
use std::time::{Duration, Instant};

use gazeintent::attention::AttentionConfig;
use gazeintent::control::Mode;
use gazeintent::synth::{play_given_board, GazeProfileParams};
use gazeintent::world::{ActionKind, BoardLayout, BoardState};

use crate::protocol::{ClientMessage, ServerMessage, SessionSummary};
use crate::server::Client;
use crate::session::{telemetry_hash, Connection};

/// Anything that answers a client message with server messages.
pub trait Transport {
    fn exchange(&mut self, msg: &ClientMessage) -> io::Result<Vec<ServerMessage>>;
}

impl Transport for Client {
    fn exchange(&mut self, msg: &ClientMessage) -> io::Result<Vec<ServerMessage>> {
        self.request(msg)
    }
}

impl Transport for Connection {
    fn exchange(&mut self, msg: &ClientMessage) -> io::Result<Vec<ServerMessage>> {
        Ok(self.handle(msg.clone()))
    }
}

/// Client messages the synthetic user sends for `episodes` decisions on the
/// board of `seed`.
pub fn synthetic_script(
    seed: u64,
    mode: Mode,
    episodes: usize,
    params: &GazeProfileParams,
    layout: &BoardLayout,
    cfg: &AttentionConfig,
    gripper_latency: f64,
) -> Vec<ClientMessage> {
    let board = BoardState::new(seed, layout);
    // wait out the gripper plus one frame before the next decision
    let played = play_given_board(board, seed, params, layout, cfg, episodes, gripper_latency + cfg.frame);
    let mut out = vec![ClientMessage::Start { seed, mode: Some(mode), version: Some(crate::protocol::PROTOCOL_VERSION) }];
    let mut samples = played.samples.iter().peekable();
    for ep in &played.episodes {
        while let Some(s) = samples.next_if(|s| s.t <= ep.action_time) {
            out.push(ClientMessage::Gaze { t: s.t, x: s.x, y: s.y, valid: s.valid });
        }
        if ep.kind == ActionKind::Place {
            let cell = ep.true_target.cell().expect("place targets a cell");
            let (_, held) = ep.board.held.expect("holding before a place");
            for _ in 0..held.turns_to(ep.board.model[cell].1) {
                out.push(ClientMessage::Rotate { t: ep.action_time });
            }
        }
        let p = layout.position(ep.true_target);
        out.push(ClientMessage::Trigger { t: ep.action_time, x: Some(p.x), y: Some(p.y) });
    }
    for s in samples {
        out.push(ClientMessage::Gaze { t: s.t, x: s.x, y: s.y, valid: s.valid });
    }
    let end = played.samples.last().map_or(0.0, |s| s.t);
    out.push(ClientMessage::End { t: end });
    out
}

#[derive(Debug, Clone)]
pub struct DriveReport {
    pub sent: usize,
    pub received: Vec<ServerMessage>,
    /// Hash over everything received, in the server's own scheme.
    pub telemetry_hash: String,
    pub summary: Option<SessionSummary>,
    /// Round-trip time of every `Gaze` message.
    pub gaze_latencies: Vec<Duration>,
}

pub fn drive<T: Transport>(transport: &mut T, script: &[ClientMessage]) -> io::Result<DriveReport> {
    let mut received = Vec::new();
    let mut gaze_latencies = Vec::new();
    for msg in script {
        let t0 = Instant::now();
        let reply = transport.exchange(msg)?;
        if matches!(msg, ClientMessage::Gaze { .. }) {
            gaze_latencies.push(t0.elapsed());
        }
        received.extend(reply);
    }
    let summary = received.iter().rev().find_map(|m| match m {
        ServerMessage::Summary { stats, .. } => Some(stats.clone()),
        _ => None,
    });
    Ok(DriveReport { sent: script.len(), telemetry_hash: telemetry_hash(&received), received, summary, gaze_latencies })
}
