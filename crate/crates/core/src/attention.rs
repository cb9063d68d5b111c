//! Visual attention profiles: per-object gaze-proximity probabilities over a
//! trailing window, resampled onto the tracker's frame grid.
//!
//! A sample at distance `d` from an object contributes `exp(-d² / 2σ²)`.
//! Window slots are aligned to integer frame indices (`round(t / frame)`),
//! which makes consecutive windows exact one-slot shifts of each other. Each
//! slot takes the nearest valid sample strictly less than one frame away;
//! slots without one (tracking gaps, invalid frames) hold 0.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::world::ObjectId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("gaze trace is empty")]
    EmptyTrace,
    #[error("gaze sample at t={got} arrived after t={last}")]
    OutOfOrder { last: f64, got: f64 },
    #[error("window end {window_end} lies beyond the latest sample at {latest}")]
    WindowBeyondTrace { window_end: f64, latest: f64 },
    #[error("invalid attention config: {0}")]
    InvalidConfig(String),
}

/// One tracker frame: gaze intersection with the task plane, in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazeSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl GazeSample {
    pub fn new(t: f64, pos: Point2, valid: bool) -> Self {
        GazeSample { t, x: pos.x, y: pos.y, valid }
    }

    pub fn pos(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    fn usable(&self) -> bool {
        self.valid && self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionConfig {
    /// Distance (mm) at which attention has dropped to exp(-1/2).
    pub sigma: f64,
    /// Anticipation window length in seconds.
    pub window: f64,
    pub samples_per_window: usize,
    /// Tracker frame period in seconds (75 Hz).
    pub frame: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig { sigma: 60.0, window: 4.0, samples_per_window: 300, frame: 1.0 / 75.0 }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<(), AttentionError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(AttentionError::InvalidConfig("sigma must be positive".into()));
        }
        if !(self.frame > 0.0 && self.window > 0.0) {
            return Err(AttentionError::InvalidConfig("frame and window must be positive".into()));
        }
        let n = (self.window / self.frame).round() as usize;
        if n != self.samples_per_window || n == 0 {
            return Err(AttentionError::InvalidConfig(format!("samples_per_window {} != round(window / frame) = {n}", self.samples_per_window)));
        }
        Ok(())
    }

    /// Index of the frame nearest to `t`.
    pub fn frame_index(&self, t: f64) -> i64 {
        (t / self.frame).round() as i64
    }

    pub fn frame_time(&self, index: i64) -> f64 {
        index as f64 * self.frame
    }
}

pub fn gaze_distance(gaze: Point2, object: Point2) -> f64 {
    gaze.distance(object)
}

/// Probability that an object at distance `d` is being gazed at.
pub fn attention_sample(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualAttentionProfile {
    pub object: ObjectId,
    pub window_end: f64,
    pub values: Vec<f64>,
}

impl VisualAttentionProfile {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

/// Bounded FIFO of gaze samples; the oldest sample is evicted on overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeTrace {
    samples: VecDeque<GazeSample>,
    capacity: usize,
}

impl GazeTrace {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        GazeTrace { samples: VecDeque::with_capacity(capacity), capacity }
    }

    /// Room for one window plus `extra` seconds of history, at the nominal rate.
    pub fn for_config(cfg: &AttentionConfig, extra: f64) -> Self {
        let n = ((cfg.window + extra.max(0.0)) / cfg.frame).ceil() as usize + 2;
        Self::with_capacity(n.max(cfg.samples_per_window))
    }

    /// Trace holding exactly `samples`, which must be in non-decreasing time order.
    pub fn from_samples(samples: Vec<GazeSample>) -> Result<Self, AttentionError> {
        if let Some(w) = samples.windows(2).find(|w| w[1].t < w[0].t) {
            return Err(AttentionError::OutOfOrder { last: w[0].t, got: w[1].t });
        }
        let capacity = samples.len().max(1);
        Ok(GazeTrace { samples: samples.into(), capacity })
    }

    /// Appends a sample, returning the evicted one when full.
    pub fn push(&mut self, s: GazeSample) -> Result<Option<GazeSample>, AttentionError> {
        if let Some(last) = self.samples.back() {
            if s.t < last.t || s.t.is_nan() {
                return Err(AttentionError::OutOfOrder { last: last.t, got: s.t });
            }
        }
        let evicted = if self.samples.len() == self.capacity { self.samples.pop_front() } else { None };
        self.samples.push_back(s);
        Ok(evicted)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GazeSample> {
        self.samples.iter()
    }

    pub fn earliest_t(&self) -> Option<f64> {
        self.samples.front().map(|s| s.t)
    }

    pub fn latest_t(&self) -> Option<f64> {
        self.samples.back().map(|s| s.t)
    }

    pub fn last_valid(&self) -> Option<&GazeSample> {
        self.samples.iter().rev().find(|s| s.usable())
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Nearest usable sample for every frame index in `first..=last`.
    pub fn timeline(&self, first: i64, last: i64, cfg: &AttentionConfig) -> Timeline {
        let len = (last - first + 1).max(0) as usize;
        let mut positions = Vec::with_capacity(len);
        let n = self.samples.len();
        let u = |i: usize| self.samples[i].t / cfg.frame;
        // samples strictly more than one frame before the first slot never match
        let mut lo = self.samples.partition_point(|s| s.t / cfg.frame <= first as f64 - 1.0);
        for k in first..=last {
            let kf = k as f64;
            while lo < n && u(lo) <= kf - 1.0 {
                lo += 1;
            }
            let mut best: Option<(f64, Point2)> = None;
            let mut i = lo;
            while i < n {
                let du = u(i) - kf;
                if du >= 1.0 {
                    break;
                }
                let s = &self.samples[i];
                if du.abs() < 1.0 - 1e-6 && s.usable() {
                    let d = du.abs();
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, s.pos()));
                    }
                }
                i += 1;
            }
            positions.push(best.map(|(_, p)| p));
        }
        Timeline { first_frame: first, positions }
    }

    /// Resamples the window ending at `window_end` (quantized to the frame grid).
    pub fn resample(&self, window_end: f64, cfg: &AttentionConfig) -> Result<ResampledWindow, AttentionError> {
        let latest = self.latest_t().ok_or(AttentionError::EmptyTrace)?;
        if window_end > latest + cfg.frame * 1.000_001 {
            return Err(AttentionError::WindowBeyondTrace { window_end, latest });
        }
        let end = cfg.frame_index(window_end);
        let first = end - cfg.samples_per_window as i64 + 1;
        Ok(ResampledWindow { end_frame: end, frame: cfg.frame, timeline: self.timeline(first, end, cfg) })
    }
}

impl Serialize for GazeTrace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.samples.iter())
    }
}

impl<'de> Deserialize<'de> for GazeTrace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<GazeSample>::deserialize(d)?;
        GazeTrace::from_samples(v).map_err(serde::de::Error::custom)
    }
}

/// Gaze positions resampled onto consecutive frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub first_frame: i64,
    pub positions: Vec<Option<Point2>>,
}

impl Timeline {
    pub fn last_frame(&self) -> i64 {
        self.first_frame + self.positions.len() as i64 - 1
    }

    /// Attention toward `object` at every frame of the timeline.
    pub fn attention(&self, object: Point2, sigma: f64) -> Vec<f64> {
        self.positions.iter().map(|p| p.map_or(0.0, |p| attention_sample(gaze_distance(p, object), sigma))).collect()
    }

    /// Slot range (into `positions`) of the `n`-slot window ending at frame `end`,
    /// if the timeline covers it entirely.
    pub fn window_range(&self, end: i64, n: usize) -> Option<std::ops::Range<usize>> {
        let start = end - n as i64 + 1;
        if start < self.first_frame || end > self.last_frame() {
            return None;
        }
        let s = (start - self.first_frame) as usize;
        Some(s..s + n)
    }
}

/// One anticipation window, ready to be scored against any number of objects.
#[derive(Debug, Clone)]
pub struct ResampledWindow {
    pub end_frame: i64,
    frame: f64,
    timeline: Timeline,
}

impl ResampledWindow {
    pub fn window_end(&self) -> f64 {
        self.end_frame as f64 * self.frame
    }

    pub fn vap(&self, object: ObjectId, pos: Point2, sigma: f64) -> VisualAttentionProfile {
        VisualAttentionProfile { object, window_end: self.window_end(), values: self.timeline.attention(pos, sigma) }
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }
}

pub fn compute_vap(
    trace: &GazeTrace,
    object: ObjectId,
    object_pos: Point2,
    window_end: f64,
    cfg: &AttentionConfig,
) -> Result<VisualAttentionProfile, AttentionError> {
    Ok(trace.resample(window_end, cfg)?.vap(object, object_pos, cfg.sigma))
}
