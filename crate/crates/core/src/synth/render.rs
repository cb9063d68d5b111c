use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::schedule::Fixation;
use super::GazeProfileParams;
use crate::attention::{AttentionConfig, GazeSample};
use crate::world::BoardLayout;

/// Interval in which the tracker reports invalid frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub start: f64,
    pub end: f64,
}

impl Dropout {
    pub fn shifted(&self, dt: f64) -> Dropout {
        Dropout { start: self.start + dt, end: self.end + dt }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Samples the fixation schedule on every frame in `[t0, t1]`. Each fixation
/// begins with a linear saccade from the previous one; every sample gets
/// isotropic Gaussian jitter. Frames inside a dropout are marked invalid.
pub fn render<R: Rng + ?Sized>(
    fixations: &[Fixation],
    dropouts: &[Dropout],
    t0: f64,
    t1: f64,
    layout: &BoardLayout,
    params: &GazeProfileParams,
    cfg: &AttentionConfig,
    rng: &mut R,
) -> Vec<GazeSample> {
    let noise = Normal::new(0.0, params.jitter_sigma).expect("validated sigma");
    let (k0, k1) = ((t0 / cfg.frame).ceil() as i64, (t1 / cfg.frame + 1e-9).floor() as i64);
    let mut out = Vec::with_capacity((k1 - k0 + 1).max(0) as usize);
    let mut fi = 0;
    for k in k0..=k1 {
        let t = cfg.frame_time(k);
        while fi + 1 < fixations.len() && fixations[fi].end <= t {
            fi += 1;
        }
        let f = &fixations[fi];
        let aim = layout.position(f.object);
        let pos = if fi > 0 && params.saccade_duration > 0.0 && t - f.start < params.saccade_duration {
            let from = layout.position(fixations[fi - 1].object);
            from.lerp(aim, ((t - f.start) / params.saccade_duration).clamp(0.0, 1.0))
        } else {
            aim
        };
        let x = pos.x + noise.sample(rng);
        let y = pos.y + noise.sample(rng);
        let valid = !dropouts.iter().any(|d| d.contains(t));
        out.push(GazeSample { t, x, y, valid });
    }
    out
}
