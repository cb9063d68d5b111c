//! Synthetic users: labelled gaze traces for pick and place decisions.
//!
//! A simulated player works through whole boards. Before every action the
//! gaze follows a fixation schedule drawn from one of five scenarios; the
//! schedule is then rendered at the tracker rate with saccades, positional
//! jitter and tracking dropouts. Every action becomes one [`Episode`].

mod io;
mod render;
mod schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{AttentionConfig, GazeSample, GazeTrace};
use crate::exec::Execution;
use crate::world::{ActionKind, BoardLayout, BoardState, ObjectId, WorldError};

pub use io::{read_corpus, write_corpus, CorpusHeader, CORPUS_FORMAT_VERSION};
pub use render::{render, Dropout};
use schedule::plan_episode;
pub use schedule::Fixation;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("target {target} is not a legal {kind:?} candidate")]
    IllegalTarget { kind: ActionKind, target: ObjectId },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("corpus i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    OneDominant,
    Alternating,
    TrendingChoice,
    Distractor,
    FaultyTracking,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::OneDominant, Scenario::Alternating, Scenario::TrendingChoice, Scenario::Distractor, Scenario::FaultyTracking];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::OneDominant => "OneDominant",
            Scenario::Alternating => "Alternating",
            Scenario::TrendingChoice => "TrendingChoice",
            Scenario::Distractor => "Distractor",
            Scenario::FaultyTracking => "FaultyTracking",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        let k = s.to_ascii_lowercase().replace(['_', '-'], "");
        Scenario::ALL.into_iter().find(|sc| sc.name().to_ascii_lowercase() == k)
    }
}

/// Relative scenario weights; they need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioMix {
    pub one_dominant: f64,
    pub alternating: f64,
    pub trending_choice: f64,
    pub distractor: f64,
    pub faulty_tracking: f64,
}

impl Default for ScenarioMix {
    fn default() -> Self {
        ScenarioMix { one_dominant: 0.55, alternating: 0.20, trending_choice: 0.15, distractor: 0.07, faulty_tracking: 0.03 }
    }
}

impl ScenarioMix {
    pub fn only(s: Scenario) -> Self {
        let mut m = ScenarioMix { one_dominant: 0.0, alternating: 0.0, trending_choice: 0.0, distractor: 0.0, faulty_tracking: 0.0 };
        m.set(s, 1.0);
        m
    }

    pub fn weight(&self, s: Scenario) -> f64 {
        match s {
            Scenario::OneDominant => self.one_dominant,
            Scenario::Alternating => self.alternating,
            Scenario::TrendingChoice => self.trending_choice,
            Scenario::Distractor => self.distractor,
            Scenario::FaultyTracking => self.faulty_tracking,
        }
    }

    pub fn set(&mut self, s: Scenario, w: f64) {
        *match s {
            Scenario::OneDominant => &mut self.one_dominant,
            Scenario::Alternating => &mut self.alternating,
            Scenario::TrendingChoice => &mut self.trending_choice,
            Scenario::Distractor => &mut self.distractor,
            Scenario::FaultyTracking => &mut self.faulty_tracking,
        } = w;
    }

    /// Parses `Name=w,Name=w`; unnamed scenarios get weight 0.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut m = ScenarioMix::only(Scenario::OneDominant);
        m.one_dominant = 0.0;
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, w) = part.split_once('=').ok_or_else(|| SynthError::InvalidParams(format!("bad mix entry {part:?}")))?;
            let s = Scenario::parse(name.trim()).ok_or_else(|| SynthError::InvalidParams(format!("unknown scenario {name:?}")))?;
            let w: f64 = w.trim().parse().map_err(|_| SynthError::InvalidParams(format!("bad weight in {part:?}")))?;
            m.set(s, w);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let ws = Scenario::ALL.map(|s| self.weight(s));
        if ws.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || ws.iter().sum::<f64>() <= 0.0 {
            return Err(SynthError::InvalidParams("scenario weights must be non-negative with a positive sum".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Scenario {
        let total: f64 = Scenario::ALL.iter().map(|&s| self.weight(s)).sum();
        let mut u = rng.random::<f64>() * total;
        for s in Scenario::ALL {
            let w = self.weight(s);
            if u < w {
                return s;
            }
            u -= w;
        }
        *Scenario::ALL.iter().rev().find(|&&s| self.weight(s) > 0.0).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationDist {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GazeProfileParams {
    /// Glance length range, seconds.
    pub fixation_duration: [f64; 2],
    /// Per-sample positional noise, mm.
    pub jitter_sigma: f64,
    pub saccade_duration: f64,
    /// Inclusive range of look-away/look-back repetitions in Alternating.
    pub alternation_count: [u32; 2],
    pub distractor_prob: f64,
    pub dropout_prob: f64,
    pub pick_duration: DurationDist,
    pub place_duration: DurationDist,
    pub min_duration: f64,
    /// The final fixation on the target starts at least this long before the action.
    pub lead: f64,
    /// Gaze kept before each episode's anticipation window, seconds.
    pub history: f64,
    pub mix: ScenarioMix,
}

impl Default for GazeProfileParams {
    fn default() -> Self {
        GazeProfileParams {
            fixation_duration: [0.2, 0.6],
            jitter_sigma: 12.0,
            saccade_duration: 0.04,
            alternation_count: [1, 3],
            distractor_prob: 0.25,
            dropout_prob: 0.05,
            pick_duration: DurationDist { mean: 3.61, sd: 1.36 },
            place_duration: DurationDist { mean: 4.65, sd: 1.34 },
            min_duration: 1.0,
            lead: 0.4,
            history: 4.0,
            mix: ScenarioMix::default(),
        }
    }
}

impl GazeProfileParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        let [f0, f1] = self.fixation_duration;
        if !(f0 > 0.0 && f1 >= f0) {
            return bad("fixation_duration must be a positive range");
        }
        if !(self.jitter_sigma >= 0.0 && self.saccade_duration >= 0.0) {
            return bad("jitter_sigma and saccade_duration must be non-negative");
        }
        if self.alternation_count[0] < 1 || self.alternation_count[1] < self.alternation_count[0] {
            return bad("alternation_count must be a range starting at 1 or more");
        }
        for p in [self.distractor_prob, self.dropout_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        for d in [self.pick_duration, self.place_duration] {
            if !(d.mean > 0.0 && d.sd >= 0.0) {
                return bad("duration distributions need a positive mean");
            }
        }
        if !(self.min_duration > 0.0 && self.lead > 0.0 && self.lead < self.min_duration && self.history >= 0.0) {
            return bad("need 0 < lead < min_duration and history >= 0");
        }
        self.mix.validate()
    }

    pub fn sample_duration<R: Rng + ?Sized>(&self, kind: ActionKind, rng: &mut R) -> f64 {
        let d = match kind {
            ActionKind::Pick => self.pick_duration,
            ActionKind::Place => self.place_duration,
        };
        let x = Normal::new(d.mean, d.sd).expect("validated sd").sample(rng);
        x.max(self.min_duration)
    }

    pub(crate) fn glance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let [a, b] = self.fixation_duration;
        if b > a {
            rng.random_range(a..b)
        } else {
            a
        }
    }
}

/// One labelled decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Episode {
    pub kind: ActionKind,
    /// World state at the start of the decision.
    pub board: BoardState,
    pub candidates: Vec<ObjectId>,
    pub true_target: ObjectId,
    pub start_time: f64,
    pub action_time: f64,
    pub scenario: Scenario,
    pub trace: GazeTrace,
}

impl Episode {
    pub fn duration(&self) -> f64 {
        self.action_time - self.start_time
    }

    /// Seconds of gaze available before `action_time`.
    pub fn coverage(&self) -> f64 {
        self.trace.earliest_t().map_or(0.0, |t0| self.action_time - t0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub seed: u64,
    pub params: GazeProfileParams,
    pub layout: BoardLayout,
    pub episodes: Vec<Episode>,
}

impl Corpus {
    pub fn of_kind(&self, kind: ActionKind) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(move |e| e.kind == kind)
    }

    pub fn filtered(&self, keep: impl Fn(&Episode) -> bool) -> Corpus {
        Corpus {
            seed: self.seed,
            params: self.params.clone(),
            layout: self.layout.clone(),
            episodes: self.episodes.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn scenario_histogram(&self) -> Vec<(Scenario, usize)> {
        Scenario::ALL.iter().map(|&s| (s, self.episodes.iter().filter(|e| e.scenario == s).count())).collect()
    }
}

/// Episodes produced by one full board: one pick and one place per block.
pub const EPISODES_PER_BOARD: usize = 2 * (crate::world::NUM_CELLS - crate::world::PRECOMPLETED);

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Seconds of gaze kept before every action.
pub fn trace_span(params: &GazeProfileParams, cfg: &AttentionConfig) -> f64 {
    cfg.window + params.history
}

/// A decision inside a continuously played board, before rendering.
#[derive(Debug, Clone)]
pub struct PlannedEpisode {
    pub kind: ActionKind,
    pub board: BoardState,
    pub candidates: Vec<ObjectId>,
    pub true_target: ObjectId,
    pub start_time: f64,
    pub action_time: f64,
    pub scenario: Scenario,
}

/// A whole board played by the synthetic user: decisions plus the rendered gaze stream.
#[derive(Debug, Clone)]
pub struct PlayedBoard {
    pub episodes: Vec<PlannedEpisode>,
    pub samples: Vec<GazeSample>,
    pub final_board: BoardState,
}

/// Plays `board_index` of a corpus to completion (or until `max_episodes`).
pub fn play_board(
    seed: u64,
    board_index: u64,
    params: &GazeProfileParams,
    layout: &BoardLayout,
    cfg: &AttentionConfig,
    max_episodes: usize,
) -> PlayedBoard {
    let mut rng = stream_rng(seed, board_index);
    let board_seed: u64 = rng.random();
    let board = BoardState::new(board_seed, layout);
    play(board, rng, seed, board_index, params, layout, cfg, max_episodes, 0.0)
}

/// Plays a given board the same way, holding gaze on each acted-on object for
/// `pause` seconds before the next decision starts (e.g. while a gripper moves).
pub fn play_given_board(
    board: BoardState,
    seed: u64,
    params: &GazeProfileParams,
    layout: &BoardLayout,
    cfg: &AttentionConfig,
    max_episodes: usize,
    pause: f64,
) -> PlayedBoard {
    play(board, stream_rng(seed, 0), seed, 0, params, layout, cfg, max_episodes, pause.max(0.0))
}

fn play(
    mut board: BoardState,
    mut rng: ChaCha8Rng,
    seed: u64,
    board_index: u64,
    params: &GazeProfileParams,
    layout: &BoardLayout,
    cfg: &AttentionConfig,
    max_episodes: usize,
    pause: f64,
) -> PlayedBoard {
    let mut fixations = Vec::new();
    let mut dropouts = Vec::new();
    let lead_in = trace_span(params, cfg);
    schedule::scan(&mut fixations, 0.0, lead_in, layout, params, &mut rng);
    let mut t = lead_in;
    let mut episodes = Vec::new();
    let mut idx = 0u64;
    let mut planned: Option<usize> = None;
    while !board.is_complete() && episodes.len() < max_episodes {
        let kind = if board.held.is_none() { ActionKind::Pick } else { ActionKind::Place };
        let mut erng = stream_rng(seed, (board_index + 1) << 32 | idx);
        idx += 1;
        let (candidates, target) = match kind {
            ActionKind::Pick => {
                // plan the next block first, then fetch its piece
                let open: Vec<usize> = (0..board.num_cells()).filter(|&c| !board.completed[c]).collect();
                let cell = open[erng.random_range(0..open.len())];
                let slot = board.slot_of(board.model[cell].0);
                (board.candidates(), (ObjectId::Slot(slot), Some(cell)))
            }
            ActionKind::Place => {
                let cell = planned.take().expect("place follows a pick");
                (board.candidates(), (ObjectId::Cell(cell), None))
            }
        };
        let scenario = params.mix.sample(&mut erng);
        let duration = params.sample_duration(kind, &mut erng);
        let ctx = schedule::Context { board: &board, layout, kind, target: target.0, planned_cell: target.1, candidates: &candidates };
        let plan = plan_episode(&ctx, scenario, duration, params, cfg, &mut erng);
        fixations.extend(plan.fixations.iter().map(|f| f.shifted(t)));
        dropouts.extend(plan.dropouts.iter().map(|d| d.shifted(t)));
        episodes.push(PlannedEpisode {
            kind,
            board: board.clone(),
            candidates,
            true_target: target.0,
            start_time: t,
            action_time: t + duration,
            scenario,
        });
        if target.1.is_some() {
            planned = target.1;
        }
        match kind {
            ActionKind::Pick => board.apply_pick(target.0.slot().unwrap()).expect("planned pick is legal"),
            ActionKind::Place => {
                let cell = target.0.cell().unwrap();
                // the held piece is rotated out of view to match the model
                while board.held.unwrap().1 != board.model[cell].1 {
                    board.rotate_held().unwrap();
                }
                board.apply_place(cell).expect("planned place is legal");
            }
        }
        t += duration;
        if pause > 0.0 {
            fixations.push(Fixation { start: t, end: t + pause, object: target.0 });
            t += pause;
        }
    }
    let mut rrng = stream_rng(seed, (board_index + 1) << 32 | 0xffff_ffff);
    let samples = render(&fixations, &dropouts, 0.0, t, layout, params, cfg, &mut rrng);
    PlayedBoard { episodes, samples, final_board: board }
}

/// Cuts the stream of a played board into self-contained episodes.
pub fn slice_episodes(played: &PlayedBoard, params: &GazeProfileParams, cfg: &AttentionConfig) -> Vec<Episode> {
    let span = trace_span(params, cfg);
    played
        .episodes
        .iter()
        .map(|p| {
            let lo = played.samples.partition_point(|s| s.t < p.action_time - span - 1e-9);
            let hi = played.samples.partition_point(|s| s.t <= p.action_time + 1e-9);
            Episode {
                kind: p.kind,
                board: p.board.clone(),
                candidates: p.candidates.clone(),
                true_target: p.true_target,
                start_time: p.start_time,
                action_time: p.action_time,
                scenario: p.scenario,
                trace: GazeTrace::from_samples(played.samples[lo..hi].to_vec()).expect("rendered in order"),
            }
        })
        .collect()
}

pub fn generate_corpus(
    params: &GazeProfileParams,
    n_episodes: usize,
    seed: u64,
    layout: &BoardLayout,
    cfg: &AttentionConfig,
    exec: Execution,
) -> Result<Corpus, SynthError> {
    params.validate()?;
    layout.validate()?;
    if n_episodes == 0 {
        return Err(SynthError::InvalidParams("n_episodes must be positive".into()));
    }
    let boards = n_episodes.div_ceil(EPISODES_PER_BOARD);
    let per_board = exec.map_range(boards, |b| {
        let want = (n_episodes - b * EPISODES_PER_BOARD).min(EPISODES_PER_BOARD);
        let played = play_board(seed, b as u64, params, layout, cfg, want);
        slice_episodes(&played, params, cfg)
    });
    let episodes: Vec<Episode> = per_board.into_iter().flatten().collect();
    debug_assert_eq!(episodes.len(), n_episodes);
    Ok(Corpus { seed, params: params.clone(), layout: layout.clone(), episodes })
}

/// A standalone episode: a scanning lead-in followed by the scenario schedule.
pub fn sample_episode<R: Rng + ?Sized>(
    board: &BoardState,
    layout: &BoardLayout,
    kind: ActionKind,
    true_target: ObjectId,
    scenario: Scenario,
    params: &GazeProfileParams,
    cfg: &AttentionConfig,
    rng: &mut R,
) -> Result<Episode, SynthError> {
    let candidates = match kind {
        ActionKind::Pick => board.legal_pick_candidates()?.into_iter().map(ObjectId::Slot).collect::<Vec<_>>(),
        ActionKind::Place => board.legal_place_candidates()?.into_iter().map(ObjectId::Cell).collect(),
    };
    if !candidates.contains(&true_target) {
        return Err(SynthError::IllegalTarget { kind, target: true_target });
    }
    let planned_cell = match kind {
        ActionKind::Pick => {
            let ty = board.stock[true_target.slot().unwrap()];
            let open: Vec<usize> = board.incomplete_cells_of(ty).collect();
            Some(open[rng.random_range(0..open.len())])
        }
        ActionKind::Place => None,
    };
    let lead_in = trace_span(params, cfg);
    let mut fixations = Vec::new();
    schedule::scan(&mut fixations, 0.0, lead_in, layout, params, rng);
    let duration = params.sample_duration(kind, rng);
    let ctx = schedule::Context { board, layout, kind, target: true_target, planned_cell, candidates: &candidates };
    let plan = plan_episode(&ctx, scenario, duration, params, cfg, rng);
    fixations.extend(plan.fixations.iter().map(|f| f.shifted(lead_in)));
    let dropouts: Vec<Dropout> = plan.dropouts.iter().map(|d| d.shifted(lead_in)).collect();
    let end = lead_in + duration;
    let samples = render(&fixations, &dropouts, 0.0, end, layout, params, cfg, rng);
    let span = trace_span(params, cfg);
    let lo = samples.partition_point(|s| s.t < end - span - 1e-9);
    Ok(Episode {
        kind,
        board: board.clone(),
        candidates,
        true_target,
        start_time: lead_in,
        action_time: end,
        scenario,
        trace: GazeTrace::from_samples(samples[lo..].to_vec()).expect("rendered in order"),
    })
}
