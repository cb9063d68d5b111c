use serde::{Deserialize, Serialize};

use super::IntentError;
use crate::attention::{attention_sample, AttentionConfig, GazeTrace};
use crate::world::{ActionKind, BoardLayout, BoardState, ObjectId};

/// Which blocks make up a pick feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickFeatureSet {
    /// Own attention followed by that of the most-attended matching cell.
    Full,
    /// Own attention only.
    F1Only,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: ActionKind,
    pub values: Vec<f64>,
}

/// Per-object attention for every frame of a span, with prefix sums for
/// window means. Any window inside the span can be cut out without
/// resampling again.
#[derive(Debug, Clone)]
pub struct AttentionFrames {
    first_frame: i64,
    len: usize,
    n: usize,
    n_slots: usize,
    series: Vec<Vec<f64>>,
    prefix: Vec<Vec<f64>>,
}

impl AttentionFrames {
    /// Covers frames `first..=last`.
    pub fn build(trace: &GazeTrace, layout: &BoardLayout, first: i64, last: i64, cfg: &AttentionConfig) -> Self {
        let timeline = trace.timeline(first, last, cfg);
        let objects: Vec<_> = layout.stock_slots.iter().chain(&layout.pattern_cells).copied().collect();
        let mut series = Vec::with_capacity(objects.len());
        let mut prefix = Vec::with_capacity(objects.len());
        for &pos in &objects {
            let s: Vec<f64> = timeline.positions.iter().map(|p| p.map_or(0.0, |p| attention_sample(p.distance(pos), cfg.sigma))).collect();
            let mut acc = 0.0;
            let mut pre = Vec::with_capacity(s.len() + 1);
            pre.push(0.0);
            for v in &s {
                acc += v;
                pre.push(acc);
            }
            series.push(s);
            prefix.push(pre);
        }
        AttentionFrames {
            first_frame: first,
            len: timeline.positions.len(),
            n: cfg.samples_per_window,
            n_slots: layout.stock_slots.len(),
            series,
            prefix,
        }
    }

    /// Frames for the single window ending at `window_end`.
    pub fn for_window(trace: &GazeTrace, layout: &BoardLayout, window_end: f64, cfg: &AttentionConfig) -> Result<Self, IntentError> {
        let latest = trace.latest_t().ok_or(crate::attention::AttentionError::EmptyTrace)?;
        if window_end > latest + cfg.frame * 1.000_001 {
            return Err(crate::attention::AttentionError::WindowBeyondTrace { window_end, latest }.into());
        }
        let end = cfg.frame_index(window_end);
        Ok(Self::build(trace, layout, end - cfg.samples_per_window as i64 + 1, end, cfg))
    }

    pub fn first_frame(&self) -> i64 {
        self.first_frame
    }

    pub fn last_frame(&self) -> i64 {
        self.first_frame + self.len as i64 - 1
    }

    fn index(&self, id: ObjectId) -> usize {
        match id {
            ObjectId::Slot(s) => s,
            ObjectId::Cell(c) => self.n_slots + c,
        }
    }

    fn range(&self, end: i64) -> Option<std::ops::Range<usize>> {
        let start = end - self.n as i64 + 1;
        if start < self.first_frame || end > self.last_frame() {
            return None;
        }
        let s = (start - self.first_frame) as usize;
        Some(s..s + self.n)
    }

    /// The attention profile of `id` for the window ending at frame `end`.
    pub fn window(&self, id: ObjectId, end: i64) -> Option<&[f64]> {
        let r = self.range(end)?;
        Some(&self.series[self.index(id)][r])
    }

    pub fn window_mean(&self, id: ObjectId, end: i64) -> Option<f64> {
        let r = self.range(end)?;
        let p = &self.prefix[self.index(id)];
        Some((p[r.end] - p[r.start]) / self.n as f64)
    }

    /// Most-attended incomplete cell matching the piece in `slot`
    /// (largest window mean, lowest id on ties).
    pub fn related_cell(&self, board: &BoardState, slot: usize, end: i64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in board.incomplete_cells_of(board.stock[slot]) {
            let m = self.window_mean(ObjectId::Cell(c), end)?;
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((c, m));
            }
        }
        best.map(|b| b.0)
    }

    /// Writes the feature vector of `candidate` into `out` (cleared first).
    pub fn features_into(
        &self,
        board: &BoardState,
        kind: ActionKind,
        candidate: ObjectId,
        end: i64,
        set: PickFeatureSet,
        out: &mut Vec<f64>,
    ) -> Result<(), IntentError> {
        out.clear();
        let f1 = self.window(candidate, end).ok_or(IntentError::InsufficientTrace)?;
        out.extend_from_slice(f1);
        if kind == ActionKind::Pick && set == PickFeatureSet::Full {
            let slot = candidate.slot().ok_or(IntentError::IllegalCandidate(candidate))?;
            match self.related_cell(board, slot, end) {
                Some(c) => out.extend_from_slice(self.window(ObjectId::Cell(c), end).unwrap()),
                None => out.resize(2 * self.n, 0.0),
            }
        }
        Ok(())
    }
}

fn check_pick_slot(board: &BoardState, slot: usize) -> Result<(), IntentError> {
    if slot >= board.stock.len() {
        return Err(IntentError::EmptySlot(slot));
    }
    Ok(())
}

/// F1 ‖ F2 for a stock slot: its own profile, then the profile of the
/// most-attended incomplete cell of the same type (zeros if none is left).
pub fn pick_features(
    trace: &GazeTrace,
    board: &BoardState,
    layout: &BoardLayout,
    slot: usize,
    window_end: f64,
    cfg: &AttentionConfig,
) -> Result<FeatureVector, IntentError> {
    check_pick_slot(board, slot)?;
    let frames = AttentionFrames::for_window(trace, layout, window_end, cfg)?;
    let mut values = Vec::with_capacity(2 * cfg.samples_per_window);
    frames.features_into(board, ActionKind::Pick, ObjectId::Slot(slot), frames.last_frame(), PickFeatureSet::Full, &mut values)?;
    Ok(FeatureVector { kind: ActionKind::Pick, values })
}

/// F1 for a pattern cell that can receive the held piece.
pub fn place_features(
    trace: &GazeTrace,
    board: &BoardState,
    layout: &BoardLayout,
    cell: usize,
    window_end: f64,
    cfg: &AttentionConfig,
) -> Result<FeatureVector, IntentError> {
    let legal = board.legal_place_candidates()?;
    if !legal.contains(&cell) {
        return Err(IntentError::IllegalCandidate(ObjectId::Cell(cell)));
    }
    let frames = AttentionFrames::for_window(trace, layout, window_end, cfg)?;
    let mut values = Vec::with_capacity(cfg.samples_per_window);
    frames.features_into(board, ActionKind::Place, ObjectId::Cell(cell), frames.last_frame(), PickFeatureSet::Full, &mut values)?;
    Ok(FeatureVector { kind: ActionKind::Place, values })
}
