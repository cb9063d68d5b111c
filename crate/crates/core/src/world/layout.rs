use serde::{Deserialize, Serialize};

use super::{ObjectId, WorldError, NUM_CELLS, NUM_SLOTS};
use crate::geometry::Point2;

/// Positions of the stock column and the 6x4 pattern grid on the task plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardLayout {
    pub stock_slots: Vec<Point2>,
    pub pattern_cells: Vec<Point2>,
    pub cell_size: f64,
}

pub const GRID_COLS: usize = 6;
pub const GRID_ROWS: usize = 4;

impl Default for BoardLayout {
    fn default() -> Self {
        Self::standard()
    }
}

impl BoardLayout {
    /// 80 mm cells with 10 mm gutters; the stock column sits 120 mm left of
    /// the workspace, one slot per grid row. Cell ids are row-major.
    pub fn standard() -> Self {
        let cell = 80.0;
        let pitch = cell + 10.0;
        let half = cell / 2.0;
        let pattern_cells = (0..GRID_ROWS)
            .flat_map(|r| (0..GRID_COLS).map(move |c| (r, c)))
            .map(|(r, c)| Point2::new(c as f64 * pitch + half, r as f64 * pitch + half))
            .collect();
        let stock_slots = (0..GRID_ROWS).map(|r| Point2::new(-120.0 - half, r as f64 * pitch + half)).collect();
        BoardLayout { stock_slots, pattern_cells, cell_size: cell }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.pattern_cells.len() != NUM_CELLS {
            return Err(WorldError::InvalidLayout(format!("{} pattern cells, expected {NUM_CELLS}", self.pattern_cells.len())));
        }
        if self.stock_slots.len() != NUM_SLOTS {
            return Err(WorldError::InvalidLayout(format!("{} stock slots, expected {NUM_SLOTS}", self.stock_slots.len())));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(WorldError::InvalidLayout("cell_size must be positive".into()));
        }
        let all: Vec<Point2> = self.stock_slots.iter().chain(&self.pattern_cells).copied().collect();
        if all.iter().any(|p| !p.is_finite()) {
            return Err(WorldError::InvalidLayout("non-finite position".into()));
        }
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if a == b {
                    return Err(WorldError::InvalidLayout(format!("duplicate position {a:?}")));
                }
            }
        }
        let (s_lo, s_hi) = bounds(&self.stock_slots, self.cell_size);
        let (w_lo, w_hi) = bounds(&self.pattern_cells, self.cell_size);
        let overlap = s_lo.x < w_hi.x && w_lo.x < s_hi.x && s_lo.y < w_hi.y && w_lo.y < s_hi.y;
        if overlap {
            return Err(WorldError::InvalidLayout("stock and workspace regions overlap".into()));
        }
        Ok(())
    }

    pub fn position(&self, id: ObjectId) -> Point2 {
        match id {
            ObjectId::Slot(s) => self.stock_slots[s],
            ObjectId::Cell(c) => self.pattern_cells[c],
        }
    }

    pub fn all_objects(&self) -> impl Iterator<Item = ObjectId> + '_ {
        (0..self.stock_slots.len()).map(ObjectId::Slot).chain((0..self.pattern_cells.len()).map(ObjectId::Cell))
    }

    /// Resting position of the effector tip: midway between stock and workspace, below the board.
    pub fn crouch_position(&self) -> Point2 {
        let (s_lo, _) = bounds(&self.stock_slots, self.cell_size);
        let (w_lo, w_hi) = bounds(&self.pattern_cells, self.cell_size);
        Point2::new((s_lo.x + w_hi.x) / 2.0, w_lo.y.min(s_lo.y) - self.cell_size)
    }
}

fn bounds(points: &[Point2], size: f64) -> (Point2, Point2) {
    let h = size / 2.0;
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x - h);
        lo.y = lo.y.min(p.y - h);
        hi.x = hi.x.max(p.x + h);
        hi.y = hi.y.max(p.y + h);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_layout_is_valid() {
        let l = BoardLayout::standard();
        l.validate().unwrap();
        assert_eq!(l.pattern_cells.len(), 24);
        assert_eq!(l.stock_slots.len(), 4);
        // neighbouring cells sit one pitch apart
        assert_eq!(l.pattern_cells[0].distance(l.pattern_cells[1]), 90.0);
        // 120 mm gap between the stock column and the workspace
        assert_eq!(l.pattern_cells[0].x - 40.0 - (l.stock_slots[0].x + 40.0), 120.0);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let mut l = BoardLayout::standard();
        l.stock_slots[0] = Point2::new(45.0, 45.0);
        assert!(matches!(l.validate(), Err(WorldError::InvalidLayout(_))));
        let mut l = BoardLayout::standard();
        l.pattern_cells.pop();
        assert!(l.validate().is_err());
    }
}
