//! One live session: gaze in, predictions and effector motion out.

use std::sync::Arc;

use gazeintent::attention::{AttentionError, GazeSample, GazeTrace};
use gazeintent::control::{corrective_move_count, ControlEvent, ControllerConfig, ControllerState, Mode};
use gazeintent::geometry::Point2;
use gazeintent::intent::{legal_candidates, predict_frames, AttentionFrames, IntentError, IntentModels, PickFeatureSet, PredictorConfig};
use gazeintent::world::{ActionKind, BoardLayout, BoardState, ObjectId, PlaceOutcome, WorldError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::{ActionResult, ClientMessage, ErrorCode, ServerMessage, SessionSummary, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("model check failed: {0}")]
    ModelLoad(String),
    #[error("message at t={got} is older than the session clock {clock}")]
    OutOfOrder { clock: f64, got: f64 },
    #[error("malformed message: {0}")]
    Protocol(String),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("no session started")]
    NotStarted,
    #[error("session already started")]
    AlreadyStarted,
    #[error("gripper busy until t={0}")]
    Busy(f64),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Intent(#[from] IntentError),
}

impl SessionError {
    pub fn code(&self) -> ErrorCode {
        match self {
            SessionError::Protocol(_) => ErrorCode::Protocol,
            SessionError::Version(_) => ErrorCode::Version,
            SessionError::NotStarted => ErrorCode::NotStarted,
            SessionError::AlreadyStarted => ErrorCode::AlreadyStarted,
            SessionError::OutOfOrder { .. } => ErrorCode::OutOfOrder,
            SessionError::Busy(_) => ErrorCode::Busy,
            SessionError::World(_) => ErrorCode::IllegalAction,
            SessionError::ModelLoad(_) | SessionError::Intent(_) => ErrorCode::Internal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub predictor: PredictorConfig,
    pub controller: ControllerConfig,
    /// Seconds the gripper animation takes; no other action fires meanwhile.
    pub gripper_latency: f64,
    /// Reach of a trigger pull, mm. Defaults to half a cell.
    pub trigger_radius: Option<f64>,
    pub default_mode: Mode,
    pub layout: BoardLayout,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            predictor: PredictorConfig::default(),
            controller: ControllerConfig::default(),
            gripper_latency: 1.3,
            trigger_radius: None,
            default_mode: Mode::FollowIntention,
            layout: BoardLayout::standard(),
        }
    }
}

impl SessionConfig {
    pub fn trigger_radius(&self) -> f64 {
        self.trigger_radius.unwrap_or(self.layout.cell_size / 2.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.predictor.attention.validate().map_err(|e| e.to_string())?;
        self.controller.validate()?;
        self.layout.validate().map_err(|e| e.to_string())?;
        if !(self.gripper_latency >= 0.0 && self.gripper_latency.is_finite()) {
            return Err("gripper_latency must be non-negative".into());
        }
        if self.trigger_radius.is_some_and(|r| !(r > 0.0)) {
            return Err("trigger_radius must be positive".into());
        }
        Ok(())
    }
}

/// Server messages produced so far, with a running hash of all of them.
#[derive(Debug, Clone, Default)]
pub struct Outbox {
    pending: Vec<ServerMessage>,
    hasher: Sha256,
    sent: usize,
}

impl Outbox {
    pub fn emit(&mut self, m: ServerMessage) {
        self.hasher.update(serde_json::to_vec(&m).expect("server message serializes"));
        self.hasher.update(b"\n");
        self.sent += 1;
        self.pending.push(m);
    }

    pub fn drain(&mut self) -> Vec<ServerMessage> {
        std::mem::take(&mut self.pending)
    }

    /// Hex SHA-256 over every message emitted so far.
    pub fn hash(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    pub fn sent(&self) -> usize {
        self.sent
    }
}

/// Hash of a message stream, computed the way [`Outbox`] does.
pub fn telemetry_hash<'a>(msgs: impl IntoIterator<Item = &'a ServerMessage>) -> String {
    let mut h = Sha256::new();
    for m in msgs {
        h.update(serde_json::to_vec(m).expect("server message serializes"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy)]
struct PendingAction {
    due: f64,
    kind: ActionKind,
    target: ObjectId,
}

pub struct Session {
    pub id: String,
    pub seed: u64,
    pub board: BoardState,
    pub trace: GazeTrace,
    pub controller: ControllerState,
    pub mode: Mode,
    pending_mode: Option<Mode>,
    models: Arc<IntentModels>,
    pick_set: PickFeatureSet,
    cfg: SessionConfig,
    clock: f64,
    last_step: Option<f64>,
    pending: Option<PendingAction>,
    events: Vec<ControlEvent>,
    rng: ChaCha8Rng,
    blocks_completed: usize,
    mismatches: usize,
    misses: usize,
    predictions: usize,
    buf: Vec<f64>,
}

pub fn open_session(seed: u64, mode: Mode, models: Arc<IntentModels>, cfg: &SessionConfig) -> Result<Session, SessionError> {
    let attention = &cfg.predictor.attention;
    models.check(attention).map_err(|e| SessionError::ModelLoad(e.to_string()))?;
    let pick_set = models.pick_feature_set(attention).map_err(|e| SessionError::ModelLoad(e.to_string()))?;
    Ok(Session {
        id: format!("{seed:016x}-{}", mode.name()),
        seed,
        board: BoardState::new(seed, &cfg.layout),
        trace: GazeTrace::for_config(attention, 1.0),
        controller: ControllerState::new(&cfg.controller, &cfg.layout),
        mode,
        pending_mode: None,
        models,
        pick_set,
        cfg: cfg.clone(),
        clock: 0.0,
        last_step: None,
        pending: None,
        events: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        blocks_completed: 0,
        mismatches: 0,
        misses: 0,
        predictions: 0,
        buf: Vec::new(),
    })
}

impl Session {
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> &[ControlEvent] {
        &self.events
    }

    pub fn pick_feature_set(&self) -> PickFeatureSet {
        self.pick_set
    }

    pub fn welcome(&self) -> ServerMessage {
        ServerMessage::Welcome {
            t: self.clock,
            version: PROTOCOL_VERSION,
            session_id: self.id.clone(),
            seed: self.seed,
            mode: self.mode,
            model_hash: self.models.hash(),
            layout: self.cfg.layout.clone(),
            board: self.board.to_record(),
        }
    }

    pub fn summary(&self, out: &Outbox) -> SessionSummary {
        let minutes = self.clock / 60.0;
        SessionSummary {
            seed: self.seed,
            mode: self.mode,
            elapsed: self.clock,
            blocks_completed: self.blocks_completed,
            board_complete: self.board.is_complete(),
            blocks_per_minute: if minutes > 0.0 { self.blocks_completed as f64 / minutes } else { 0.0 },
            corrective_moves: corrective_move_count(&self.events),
            mismatches: self.mismatches,
            misses: self.misses,
            predictions: self.predictions,
            telemetry_hash: out.hash(),
        }
    }

    /// Applies one client message. On error nothing beyond time-driven
    /// completions has changed.
    pub fn ingest(&mut self, msg: &ClientMessage, out: &mut Outbox) -> Result<(), SessionError> {
        if let Some(t) = msg.time() {
            if t < self.clock {
                return Err(SessionError::OutOfOrder { clock: self.clock, got: t });
            }
            self.clock = t;
            self.settle(out);
        }
        match *msg {
            ClientMessage::Start { .. } => Err(SessionError::AlreadyStarted),
            ClientMessage::SetMode { mode } => {
                self.pending_mode = Some(mode);
                out.emit(ServerMessage::Ack { t: self.clock, of: msg.name().into() });
                Ok(())
            }
            ClientMessage::Gaze { t, x, y, valid } => {
                self.trace.push(GazeSample::new(t, Point2::new(x, y), valid)).map_err(|e| match e {
                    AttentionError::OutOfOrder { last, got } => SessionError::OutOfOrder { clock: last, got },
                    e => SessionError::Protocol(e.to_string()),
                })?;
                self.tick(t, out)
            }
            ClientMessage::Trigger { t, x, y } => self.trigger(t, x.zip(y).map(|(x, y)| Point2::new(x, y)), out),
            ClientMessage::Rotate { .. } => {
                self.board.rotate_held()?;
                out.emit(ServerMessage::State { t: self.clock, board: self.board.to_record(), busy_until: self.busy_until() });
                Ok(())
            }
            ClientMessage::End { .. } => {
                let stats = self.summary(out);
                out.emit(ServerMessage::Summary { t: self.clock, stats });
                Ok(())
            }
        }
    }

    fn busy_until(&self) -> Option<f64> {
        self.pending.map(|p| p.due)
    }

    fn action_kind(&self) -> ActionKind {
        if self.board.held.is_some() {
            ActionKind::Place
        } else {
            ActionKind::Pick
        }
    }

    fn tick(&mut self, t: f64, out: &mut Outbox) -> Result<(), SessionError> {
        let dt = self.last_step.map_or(0.0, |l| t - l);
        self.last_step = Some(t);
        if self.pending.is_none() && !self.board.is_complete() {
            let kind = self.action_kind();
            let candidates = legal_candidates(&self.board, kind)?;
            if !candidates.is_empty() {
                let attention = &self.cfg.predictor.attention;
                let frames = AttentionFrames::for_window(&self.trace, &self.cfg.layout, t, attention)?;
                let p =
                    predict_frames(&self.models, &frames, &self.board, kind, &candidates, frames.last_frame(), &self.cfg.predictor, &mut self.buf)?;
                self.predictions += 1;
                out.emit(ServerMessage::Probs { t, kind, probs: p.per_candidate.clone(), chosen: p.chosen, decided: p.decided });
                if dt > 0.0 && self.controller.needs_prediction() {
                    self.controller.step(&p, self.mode, dt, &self.cfg.layout, &mut self.rng);
                    if let Some(target) = self.controller.committed() {
                        self.events.push(ControlEvent::Commit { t, target, mode: self.mode });
                    }
                }
            }
        }
        if dt > 0.0 {
            self.controller.move_tip(dt);
        }
        let tel = self.controller.telemetry(t, self.mode);
        out.emit(ServerMessage::Tip { t, x: tel.tip[0], y: tel.tip[1], phase: tel.phase, committed: tel.committed, mode: tel.mode });
        Ok(())
    }

    /// Object within trigger reach of `pos`, nearest first.
    fn reachable(&self, kind: ActionKind, pos: Point2) -> Option<ObjectId> {
        let r = self.cfg.trigger_radius();
        let objects: Vec<ObjectId> = match kind {
            ActionKind::Pick => (0..self.cfg.layout.stock_slots.len()).map(ObjectId::Slot).collect(),
            ActionKind::Place => (0..self.cfg.layout.pattern_cells.len()).map(ObjectId::Cell).collect(),
        };
        objects
            .into_iter()
            .map(|id| (id, self.cfg.layout.position(id).distance(pos)))
            .filter(|&(_, d)| d <= r)
            .fold(None, |best: Option<(ObjectId, f64)>, c| if best.is_none_or(|b| c.1 < b.1) { Some(c) } else { best })
            .map(|b| b.0)
    }

    fn trigger(&mut self, t: f64, at: Option<Point2>, out: &mut Outbox) -> Result<(), SessionError> {
        if let Some(p) = self.pending {
            return Err(SessionError::Busy(p.due));
        }
        let kind = self.action_kind();
        let pos = at.unwrap_or(self.controller.tip_pos);
        let Some(target) = self.reachable(kind, pos) else {
            self.misses += 1;
            out.emit(ServerMessage::Outcome { t, action: kind, target: None, result: ActionResult::Missed });
            return Ok(());
        };
        if let ObjectId::Slot(s) = target {
            // validate now so the error surfaces before the animation
            self.board.clone().apply_pick(s)?;
        }
        self.events.push(ControlEvent::Action { t, kind, target });
        let due = t + self.cfg.gripper_latency;
        self.pending = Some(PendingAction { due, kind, target });
        out.emit(ServerMessage::Ack { t, of: "Trigger".into() });
        if self.cfg.gripper_latency == 0.0 {
            self.settle(out);
        }
        Ok(())
    }

    /// Completes a gripper action whose animation has finished.
    fn settle(&mut self, out: &mut Outbox) {
        let Some(p) = self.pending else { return };
        if p.due > self.clock {
            return;
        }
        self.pending = None;
        let result = match p.target {
            ObjectId::Slot(s) => {
                self.board.apply_pick(s).expect("checked at trigger time");
                ActionResult::Picked
            }
            ObjectId::Cell(c) => match self.board.apply_place(c).expect("holding since the trigger") {
                PlaceOutcome::Completed => {
                    self.blocks_completed += 1;
                    ActionResult::Completed
                }
                PlaceOutcome::MismatchReturnedToStock => {
                    self.mismatches += 1;
                    ActionResult::MismatchReturnedToStock
                }
            },
        };
        let t = self.clock;
        out.emit(ServerMessage::State { t, board: self.board.to_record(), busy_until: None });
        out.emit(ServerMessage::Outcome { t, action: p.kind, target: Some(p.target), result });
        self.controller.reset_cycle();
        self.events.push(ControlEvent::Reset { t });
        if let Some(m) = self.pending_mode.take() {
            self.mode = m;
        }
        if self.board.is_complete() {
            let stats = self.summary(out);
            out.emit(ServerMessage::Summary { t, stats });
        }
    }
}

/// Server side of one client connection: starts the session on `Start` and
/// records every accepted message for replay.
pub struct Connection {
    models: Arc<IntentModels>,
    cfg: SessionConfig,
    session: Option<Session>,
    out: Outbox,
    inputs: Vec<ClientMessage>,
}

impl Connection {
    pub fn new(models: Arc<IntentModels>, cfg: SessionConfig) -> Self {
        Connection { models, cfg, session: None, out: Outbox::default(), inputs: Vec::new() }
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn inputs(&self) -> &[ClientMessage] {
        &self.inputs
    }

    pub fn telemetry_hash(&self) -> String {
        self.out.hash()
    }

    pub fn messages_sent(&self) -> usize {
        self.out.sent()
    }

    pub fn model_hash(&self) -> String {
        self.models.hash()
    }

    /// Responses to one decoded client message; failures become an `Error` message.
    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        let r = match (&msg, self.session.as_mut()) {
            (ClientMessage::Start { seed, mode, version }, None) => match version {
                Some(v) if *v != PROTOCOL_VERSION => Err(SessionError::Version(*v)),
                _ => open_session(*seed, mode.unwrap_or(self.cfg.default_mode), self.models.clone(), &self.cfg).map(|s| {
                    self.out.emit(s.welcome());
                    self.session = Some(s);
                }),
            },
            (_, None) => Err(SessionError::NotStarted),
            (_, Some(s)) => s.ingest(&msg, &mut self.out),
        };
        if let Err(e) = r {
            let t = self.session.as_ref().map_or(0.0, Session::clock);
            self.out.emit(ServerMessage::Error { t, code: e.code(), message: e.to_string() });
        }
        self.inputs.push(msg);
        self.out.drain()
    }

    /// Responses to one raw frame. Undecodable frames get an `Error` reply
    /// that is not part of the recorded stream.
    pub fn handle_frame(&mut self, body: &[u8]) -> Vec<ServerMessage> {
        match crate::protocol::decode_client(body) {
            Ok(msg) => self.handle(msg),
            Err(e) => {
                let t = self.session.as_ref().map_or(0.0, Session::clock);
                vec![ServerMessage::Error { t, code: ErrorCode::Protocol, message: e }]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_defaults_to_half_a_cell() {
        let cfg = SessionConfig::default();
        assert_eq!(cfg.trigger_radius(), cfg.layout.cell_size / 2.0);
        assert!(cfg.validate().is_ok());
        assert!(SessionConfig { trigger_radius: Some(0.0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn outbox_hash_matches_standalone_hash() {
        let mut o = Outbox::default();
        let msgs =
            vec![ServerMessage::Ack { t: 0.0, of: "SetMode".into() }, ServerMessage::Error { t: 1.0, code: ErrorCode::Busy, message: "x".into() }];
        for m in &msgs {
            o.emit(m.clone());
        }
        assert_eq!(o.hash(), telemetry_hash(&msgs));
        assert_eq!(o.drain(), msgs);
        assert_eq!(o.sent(), 2);
    }
}
