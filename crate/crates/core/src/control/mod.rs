//! Behaviour control: turns a stream of predictions into effector motion.
//!
//! A decision cycle starts crouched, accumulates time while predictions are
//! below threshold and commits exactly once, either when the best candidate
//! reaches the threshold or when the decision cap runs out. The committed
//! target depends on the [`Mode`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::GazeTrace;
use crate::exec::Execution;
use crate::geometry::Point2;
use crate::intent::{predict_frames, AttentionFrames, IntentError, IntentModels, Prediction, PredictorConfig};
use crate::synth::{play_board, GazeProfileParams, EPISODES_PER_BOARD};
use crate::world::{ActionKind, BoardLayout, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "follow")]
    FollowIntention,
    #[serde(rename = "rebel")]
    Rebel,
    #[serde(rename = "random")]
    Random,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::FollowIntention, Mode::Rebel, Mode::Random];

    pub fn name(self) -> &'static str {
        match self {
            Mode::FollowIntention => "follow",
            Mode::Rebel => "rebel",
            Mode::Random => "random",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "follow" | "follow_intention" | "followintention" => Ok(Mode::FollowIntention),
            "rebel" => Ok(Mode::Rebel),
            "random" => Ok(Mode::Random),
            _ => Err(format!("unknown mode {s:?} (expected follow, rebel or random)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Probability at which the best candidate triggers a commit.
    pub threshold: f64,
    /// Longest time a cycle may stay undecided, seconds.
    pub decision_cap: f64,
    /// Effector tip speed, mm/s.
    pub tip_speed: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { threshold: 0.55, decision_cap: 1.3, tip_speed: 300.0 }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if !(self.decision_cap > 0.0 && self.decision_cap.is_finite()) {
            return Err("decision_cap must be positive".into());
        }
        if !(self.tip_speed > 0.0 && self.tip_speed.is_finite()) {
            return Err("tip_speed must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Crouched,
    Deciding { elapsed: f64 },
    Committed { target: ObjectId },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Crouched => "crouched",
            Phase::Deciding { .. } => "deciding",
            Phase::Committed { .. } => "committed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub phase: Phase,
    pub tip_pos: Point2,
    pub tip_target: Option<Point2>,
    pub crouch_pos: Point2,
    pub threshold: f64,
    pub decision_cap: f64,
    pub tip_speed: f64,
    /// Candidate set of the running cycle; a different set starts a new cycle.
    pub candidates: Vec<ObjectId>,
    pub cycle: u64,
}

/// Telemetry line written once per controller tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t: f64,
    pub phase: String,
    pub committed: Option<ObjectId>,
    pub tip: [f64; 2],
    pub mode: Mode,
}

impl ControllerState {
    pub fn new(cfg: &ControllerConfig, layout: &BoardLayout) -> Self {
        let crouch = layout.crouch_position();
        ControllerState {
            phase: Phase::Crouched,
            tip_pos: crouch,
            tip_target: Some(crouch),
            crouch_pos: crouch,
            threshold: cfg.threshold,
            decision_cap: cfg.decision_cap,
            tip_speed: cfg.tip_speed,
            candidates: Vec::new(),
            cycle: 0,
        }
    }

    pub fn committed(&self) -> Option<ObjectId> {
        match self.phase {
            Phase::Committed { target } => Some(target),
            _ => None,
        }
    }

    /// Whether the next `step` can change anything; false once committed.
    pub fn needs_prediction(&self) -> bool {
        self.committed().is_none()
    }

    /// Ends the running cycle: back to crouched, tip retreats.
    pub fn reset_cycle(&mut self) {
        self.phase = Phase::Crouched;
        self.tip_target = Some(self.crouch_pos);
        self.candidates.clear();
        self.cycle += 1;
    }

    /// Advances the cycle by `dt` seconds given the latest prediction. Returns
    /// the target the tip should head for.
    pub fn step<R: Rng + ?Sized>(&mut self, prediction: &Prediction, mode: Mode, dt: f64, layout: &BoardLayout, rng: &mut R) -> Option<Point2> {
        debug_assert!(dt > 0.0 && !prediction.per_candidate.is_empty());
        let same_set = self.candidates.len() == prediction.per_candidate.len()
            && self.candidates.iter().zip(prediction.per_candidate.keys()).all(|(a, b)| a == b);
        if !same_set {
            if !self.candidates.is_empty() {
                self.reset_cycle();
            }
            self.candidates = prediction.per_candidate.keys().copied().collect();
        }
        match self.phase {
            Phase::Committed { .. } => {}
            Phase::Crouched | Phase::Deciding { .. } => {
                let before = match self.phase {
                    Phase::Deciding { elapsed } => elapsed,
                    _ => 0.0,
                };
                let elapsed = (before + dt).min(self.decision_cap);
                if prediction.max_probability() >= self.threshold || elapsed >= self.decision_cap {
                    let target = choose(&prediction.per_candidate, mode, rng);
                    self.phase = Phase::Committed { target };
                    self.tip_target = Some(layout.position(target));
                } else {
                    self.phase = Phase::Deciding { elapsed };
                    self.tip_target = Some(self.crouch_pos);
                }
            }
        }
        self.tip_target
    }

    /// Moves the tip toward its target at `tip_speed`, never past it.
    pub fn move_tip(&mut self, dt: f64) {
        if let Some(target) = self.tip_target {
            self.tip_pos = self.tip_pos.step_toward(target, self.tip_speed * dt);
        }
    }

    pub fn telemetry(&self, t: f64, mode: Mode) -> TelemetryRecord {
        TelemetryRecord { t, phase: self.phase.name().to_string(), committed: self.committed(), tip: [self.tip_pos.x, self.tip_pos.y], mode }
    }
}

/// Target selection at commit time. Ties go to the lowest id.
pub fn choose<R: Rng + ?Sized>(probs: &BTreeMap<ObjectId, f64>, mode: Mode, rng: &mut R) -> ObjectId {
    let mut it = probs.iter().map(|(k, v)| (*k, *v));
    let first = it.next().expect("non-empty candidate set");
    match mode {
        Mode::FollowIntention => it.fold(first, |b, c| if c.1 > b.1 { c } else { b }).0,
        Mode::Rebel => it.fold(first, |b, c| if c.1 < b.1 { c } else { b }).0,
        Mode::Random => *probs.keys().nth(rng.random_range(0..probs.len())).expect("in range"),
    }
}

/// Events that matter for judging the controller after the fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControlEvent {
    Commit { t: f64, target: ObjectId, mode: Mode },
    Action { t: f64, kind: ActionKind, target: ObjectId },
    Reset { t: f64 },
}

/// Actions executed on a target other than the one the controller was
/// committed to at that moment.
pub fn corrective_move_count(log: &[ControlEvent]) -> usize {
    let mut committed = None;
    let mut count = 0;
    for e in log {
        match e {
            ControlEvent::Commit { target, .. } => committed = Some(*target),
            ControlEvent::Action { target, .. } => {
                if committed.is_some_and(|c| c != *target) {
                    count += 1;
                }
                committed = None;
            }
            ControlEvent::Reset { .. } => committed = None,
        }
    }
    count
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub boards: usize,
    pub seed: u64,
    pub controller: ControllerConfig,
    /// Speed at which the user drags a misplaced tip to the real target, mm/s.
    pub correction_speed: f64,
    pub user: GazeProfileParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { boards: 30, seed: 0, controller: ControllerConfig::default(), correction_speed: 300.0, user: GazeProfileParams::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Option<Mode>,
    pub cycles: usize,
    /// Cycles that committed before the user acted.
    pub decided: usize,
    /// Cycles whose commitment equalled the executed target.
    pub matches: usize,
    pub match_rate: f64,
    pub corrective_moves: usize,
    /// Mean seconds per board including corrections.
    pub completion_time: f64,
    pub mean_time_to_commit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub boards: usize,
    pub seed: u64,
    pub modes: Vec<ModeReport>,
}

impl SimReport {
    pub fn mode(&self, m: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|r| r.mode == Some(m))
    }
}

#[derive(Debug, Clone, Default)]
struct BoardOutcome {
    cycles: usize,
    decided: usize,
    matches: usize,
    commit_time: f64,
    correction_time: f64,
    duration: f64,
    log: Vec<ControlEvent>,
}

/// Closed-loop run with a non-adaptive synthetic user: the user plays each
/// board regardless of the robot, one controller per mode follows along.
pub fn simulate(
    models: &IntentModels,
    layout: &BoardLayout,
    cfg: &SimConfig,
    modes: &[Mode],
    predictor: &PredictorConfig,
    exec: Execution,
) -> Result<SimReport, IntentError> {
    models.check(&predictor.attention)?;
    let per_board = exec.map_range(cfg.boards, |b| simulate_board(models, layout, cfg, modes, predictor, b as u64));
    let mut totals: Vec<BoardOutcome> = vec![BoardOutcome::default(); modes.len()];
    for board in per_board {
        for (tot, o) in totals.iter_mut().zip(board?) {
            tot.cycles += o.cycles;
            tot.decided += o.decided;
            tot.matches += o.matches;
            tot.commit_time += o.commit_time;
            tot.correction_time += o.correction_time;
            tot.duration += o.duration;
            tot.log.extend(o.log);
        }
    }
    let modes = modes
        .iter()
        .zip(totals)
        .map(|(&m, t)| ModeReport {
            mode: Some(m),
            cycles: t.cycles,
            decided: t.decided,
            matches: t.matches,
            match_rate: if t.cycles > 0 { t.matches as f64 / t.cycles as f64 } else { 0.0 },
            corrective_moves: corrective_move_count(&t.log),
            completion_time: if cfg.boards > 0 { (t.duration + t.correction_time) / cfg.boards as f64 } else { 0.0 },
            mean_time_to_commit: if t.decided > 0 { t.commit_time / t.decided as f64 } else { 0.0 },
        })
        .collect();
    Ok(SimReport { boards: cfg.boards, seed: cfg.seed, modes })
}

fn simulate_board(
    models: &IntentModels,
    layout: &BoardLayout,
    cfg: &SimConfig,
    modes: &[Mode],
    predictor: &PredictorConfig,
    board_index: u64,
) -> Result<Vec<BoardOutcome>, IntentError> {
    let acfg = &predictor.attention;
    let played = play_board(cfg.seed, board_index, &cfg.user, layout, acfg, EPISODES_PER_BOARD);
    let trace = GazeTrace::from_samples(played.samples).expect("rendered in order");
    let last_t = trace.latest_t().unwrap_or(0.0);
    let frames = AttentionFrames::build(&trace, layout, 0, acfg.frame_index(last_t), acfg);
    let mut states: Vec<ControllerState> = modes.iter().map(|_| ControllerState::new(&cfg.controller, layout)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..modes.len())
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream((board_index << 8) | i as u64);
            r
        })
        .collect();
    let mut out: Vec<BoardOutcome> = vec![BoardOutcome::default(); modes.len()];
    let mut buf = Vec::new();
    let dt = acfg.frame;
    for ep in &played.episodes {
        let mut commit_at: Vec<Option<f64>> = vec![None; modes.len()];
        let mut end = acfg.frame_index(ep.start_time) + 1;
        while acfg.frame_time(end) < ep.action_time {
            let t = acfg.frame_time(end);
            if states.iter().any(ControllerState::needs_prediction) {
                let p = predict_frames(models, &frames, &ep.board, ep.kind, &ep.candidates, end, predictor, &mut buf)?;
                for (i, st) in states.iter_mut().enumerate() {
                    if st.needs_prediction() {
                        st.step(&p, modes[i], dt, layout, &mut rngs[i]);
                        if let Some(target) = st.committed() {
                            commit_at[i] = Some(t - ep.start_time);
                            out[i].log.push(ControlEvent::Commit { t, target, mode: modes[i] });
                        }
                    }
                }
            }
            for st in &mut states {
                st.move_tip(dt);
            }
            end += 1;
        }
        let truth = layout.position(ep.true_target);
        for (i, st) in states.iter_mut().enumerate() {
            let o = &mut out[i];
            o.cycles += 1;
            if let Some(c) = commit_at[i] {
                o.decided += 1;
                o.commit_time += c;
            }
            match st.committed() {
                Some(target) if target == ep.true_target => o.matches += 1,
                Some(_) => o.correction_time += st.tip_pos.distance(truth) / cfg.correction_speed,
                None => {}
            }
            o.log.push(ControlEvent::Action { t: ep.action_time, kind: ep.kind, target: ep.true_target });
            st.reset_cycle();
        }
    }
    let duration = played.episodes.last().map_or(0.0, |e| e.action_time - played.episodes[0].start_time);
    for o in &mut out {
        o.duration = duration;
    }
    Ok(out)
}
