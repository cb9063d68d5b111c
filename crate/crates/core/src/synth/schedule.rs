//! Fixation schedules for each scenario. Times are relative to the start of
//! the episode; every schedule ends with a block on the true target that
//! begins at least `lead` seconds before the action.

use rand::Rng;

use super::render::Dropout;
use super::{GazeProfileParams, Scenario};
use crate::attention::AttentionConfig;
use crate::world::{ActionKind, BoardLayout, BoardState, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub start: f64,
    pub end: f64,
    pub object: ObjectId,
}

impl Fixation {
    pub fn shifted(&self, dt: f64) -> Fixation {
        Fixation { start: self.start + dt, end: self.end + dt, object: self.object }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EpisodePlan {
    pub fixations: Vec<Fixation>,
    pub dropouts: Vec<Dropout>,
}

pub(crate) struct Context<'a> {
    pub board: &'a BoardState,
    pub layout: &'a BoardLayout,
    pub kind: ActionKind,
    pub target: ObjectId,
    /// For picks, the pattern cell the user intends to fill next.
    pub planned_cell: Option<usize>,
    pub candidates: &'a [ObjectId],
}

impl Context<'_> {
    fn competitors(&self) -> Vec<ObjectId> {
        self.candidates.iter().copied().filter(|&c| c != self.target).collect()
    }

    fn random_competitor<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<ObjectId> {
        let c = self.competitors();
        (!c.is_empty()).then(|| c[rng.random_range(0..c.len())])
    }

    /// The object the target is paired with: its planned cell for a pick,
    /// the stock slot of the held type for a place.
    fn related(&self) -> Option<ObjectId> {
        match self.kind {
            ActionKind::Pick => self.planned_cell.map(ObjectId::Cell),
            ActionKind::Place => self.board.held.map(|(ty, _)| ObjectId::Slot(self.board.slot_of(ty))),
        }
    }

    fn random_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> ObjectId {
        ObjectId::Cell(rng.random_range(0..self.layout.pattern_cells.len()))
    }
}

/// Random glances over the whole board filling `[t0, t1)`.
pub(crate) fn scan<R: Rng + ?Sized>(out: &mut Vec<Fixation>, t0: f64, t1: f64, layout: &BoardLayout, params: &GazeProfileParams, rng: &mut R) {
    let objects: Vec<ObjectId> = layout.all_objects().collect();
    let mut t = t0;
    while t < t1 {
        let end = (t + params.glance(rng)).min(t1);
        out.push(Fixation { start: t, end, object: objects[rng.random_range(0..objects.len())] });
        t = end;
    }
}

/// Lays out weighted segments over `[0, span)` followed by the final target block.
fn assemble(segments: &[(ObjectId, f64)], span: f64, target: ObjectId, duration: f64) -> Vec<Fixation> {
    let mut out = Vec::new();
    let total: f64 = segments.iter().map(|s| s.1).sum();
    let mut t = 0.0;
    if span > 1e-9 && total > 0.0 {
        for &(object, w) in segments {
            let end = t + span * w / total;
            if end > t {
                out.push(Fixation { start: t, end, object });
            }
            t = end;
        }
    }
    out.push(Fixation { start: span.max(0.0), end: duration, object: target });
    out
}

fn one_dominant<R: Rng + ?Sized>(ctx: &Context, d: f64, p: &GazeProfileParams, rng: &mut R) -> Vec<Fixation> {
    let share = match ctx.kind {
        ActionKind::Pick => rng.random_range(0.6..0.8),
        ActionKind::Place => rng.random_range(0.65..0.9),
    };
    let fin = (share * d).max(p.lead).min(d);
    let span = d - fin;
    let mut segs = Vec::new();
    let mut t = 0.0;
    while t < span {
        let g = p.glance(rng).min(span - t);
        let object = if rng.random_bool(p.distractor_prob) {
            ctx.random_competitor(rng).unwrap_or_else(|| ctx.random_cell(rng))
        } else if ctx.kind == ActionKind::Pick && rng.random_bool(0.2) {
            ctx.related().unwrap_or_else(|| ctx.random_cell(rng))
        } else {
            ctx.random_cell(rng)
        };
        segs.push((object, g));
        t += g;
    }
    assemble(&segs, span, ctx.target, d)
}

fn alternating<R: Rng + ?Sized>(ctx: &Context, d: f64, p: &GazeProfileParams, rng: &mut R) -> Vec<Fixation> {
    let m = rng.random_range(p.alternation_count[0]..=p.alternation_count[1]);
    let (fin, segs) = match (ctx.kind, ctx.related()) {
        (ActionKind::Pick, Some(cell)) => {
            // the planned cell dominates; the stock is compared in between
            let fin = (rng.random_range(0.15..0.3) * d).max(p.lead);
            let mut segs = vec![(cell, rng.random_range(1.0..2.0))];
            for _ in 0..m {
                let x = if rng.random_bool(0.5) { ctx.target } else { ctx.random_competitor(rng).unwrap_or(ctx.target) };
                segs.push((x, rng.random_range(0.4..0.8)));
                segs.push((cell, rng.random_range(1.0..2.0)));
            }
            (fin, segs)
        }
        (_, related) => {
            let fin = (rng.random_range(0.25..0.4) * d).max(p.lead);
            let other = related.unwrap_or_else(|| ctx.random_cell(rng));
            let mut segs = vec![(ctx.target, rng.random_range(1.0..2.0))];
            for _ in 0..m {
                segs.push((other, rng.random_range(0.4..0.8)));
                segs.push((ctx.target, rng.random_range(1.0..2.0)));
            }
            (fin, segs)
        }
    };
    let fin = fin.min(d);
    assemble(&segs, d - fin, ctx.target, d)
}

fn trending<R: Rng + ?Sized>(ctx: &Context, d: f64, p: &GazeProfileParams, rng: &mut R) -> Vec<Fixation> {
    let rounds = rng.random_range(2..=4);
    let fin = (rng.random_range(0.3..0.4) * d).max(p.lead).min(d);
    let mut segs = Vec::new();
    for r in 1..=rounds {
        let comp = ctx.random_competitor(rng).unwrap_or_else(|| ctx.random_cell(rng));
        segs.push((comp, rng.random_range(0.5..1.0)));
        segs.push((ctx.target, r as f64 * rng.random_range(0.5..1.0)));
    }
    assemble(&segs, d - fin, ctx.target, d)
}

fn distractor<R: Rng + ?Sized>(ctx: &Context, d: f64, p: &GazeProfileParams, rng: &mut R) -> Vec<Fixation> {
    let here = ctx.layout.position(ctx.target);
    let near = ctx
        .competitors()
        .into_iter()
        .min_by(|a, b| {
            let da = ctx.layout.position(*a).distance(here);
            let db = ctx.layout.position(*b).distance(here);
            da.total_cmp(&db).then(a.cmp(b))
        })
        .unwrap_or_else(|| ctx.random_cell(rng));
    let block = rng.random_range(0.3..0.45) * d;
    let glance = p.glance(rng).min(0.1 * d);
    let segs = [(ctx.random_cell(rng), glance), (near, block)];
    let fin = (d - glance - block).max(p.lead).min(d);
    assemble(&segs, d - fin, ctx.target, d)
}

fn burst<R: Rng + ?Sized>(lo: f64, hi: f64, len: f64, rng: &mut R) -> Dropout {
    let len = len.min(hi - lo);
    let start = if hi - len > lo { rng.random_range(lo..hi - len) } else { lo };
    Dropout { start, end: start + len }
}

pub(crate) fn plan_episode<R: Rng + ?Sized>(
    ctx: &Context,
    scenario: Scenario,
    duration: f64,
    params: &GazeProfileParams,
    cfg: &AttentionConfig,
    rng: &mut R,
) -> EpisodePlan {
    let d = duration;
    let fixations = match scenario {
        Scenario::OneDominant | Scenario::FaultyTracking => one_dominant(ctx, d, params, rng),
        Scenario::Alternating => alternating(ctx, d, params, rng),
        Scenario::TrendingChoice => trending(ctx, d, params, rng),
        Scenario::Distractor => distractor(ctx, d, params, rng),
    };
    let mut dropouts = Vec::new();
    if scenario == Scenario::FaultyTracking {
        let window_start = d - d.min(cfg.window);
        dropouts.push(burst(window_start, d, rng.random_range(0.3..0.8), rng));
        for _ in 0..2 {
            if rng.random_bool(params.dropout_prob) {
                dropouts.push(burst(0.0, d, rng.random_range(0.3..0.8), rng));
            }
        }
    } else if rng.random_bool(params.dropout_prob) {
        dropouts.push(burst(0.0, d, rng.random_range(0.1..0.3), rng));
    }
    EpisodePlan { fixations, dropouts }
}
