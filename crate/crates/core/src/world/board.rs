use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoardLayout, ObjectId, Orientation, PieceType, WorldError, CELLS_PER_TYPE, NUM_CELLS, NUM_SLOTS, PRECOMPLETED};

pub const BOARD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceOutcome {
    Completed,
    MismatchReturnedToStock,
}

/// Full state of one block-copy game.
///
/// Stock slots are replenished on every pick, so `stock` never changes after
/// the board is generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardState {
    pub seed: u64,
    pub model: Vec<(PieceType, Orientation)>,
    pub completed: Vec<bool>,
    pub stock: Vec<PieceType>,
    pub held: Option<(PieceType, Orientation)>,
}

impl BoardState {
    /// Random 24-cell pattern with six cells of each type, random
    /// orientations, five pre-completed cells and a shuffled stock column.
    /// A pure function of `seed`; `layout` must already be validated.
    pub fn new(seed: u64, layout: &BoardLayout) -> Self {
        debug_assert_eq!(layout.pattern_cells.len(), NUM_CELLS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut types: Vec<PieceType> = PieceType::ALL.iter().flat_map(|&t| std::iter::repeat_n(t, CELLS_PER_TYPE)).collect();
        types.shuffle(&mut rng);
        let model = types.into_iter().map(|t| (t, Orientation::new(rng.random_range(0..4)).unwrap())).collect();
        let mut completed = vec![false; NUM_CELLS];
        let idx: Vec<usize> = (0..NUM_CELLS).collect();
        for &c in idx.choose_multiple(&mut rng, PRECOMPLETED) {
            completed[c] = true;
        }
        let mut stock = PieceType::ALL.to_vec();
        stock.shuffle(&mut rng);
        BoardState { seed, model, completed, stock, held: None }
    }

    pub fn num_cells(&self) -> usize {
        self.model.len()
    }

    pub fn completed_count(&self) -> usize {
        self.completed.iter().filter(|&&c| c).count()
    }

    pub fn is_complete(&self) -> bool {
        self.completed.iter().all(|&c| c)
    }

    pub fn incomplete_cells_of(&self, ty: PieceType) -> impl Iterator<Item = usize> + '_ {
        self.model.iter().enumerate().filter(move |(i, (t, _))| *t == ty && !self.completed[*i]).map(|(i, _)| i)
    }

    pub fn slot_of(&self, ty: PieceType) -> usize {
        self.stock.iter().position(|&t| t == ty).expect("every type has a stock slot")
    }

    /// Stock slots whose type still has an incomplete cell.
    pub fn legal_pick_candidates(&self) -> Result<Vec<usize>, WorldError> {
        if self.held.is_some() {
            return Err(WorldError::HeldPiece);
        }
        Ok((0..self.stock.len()).filter(|&s| self.incomplete_cells_of(self.stock[s]).next().is_some()).collect())
    }

    /// Incomplete cells of the held piece's type; orientation is ignored.
    pub fn legal_place_candidates(&self) -> Result<Vec<usize>, WorldError> {
        let (ty, _) = self.held.ok_or(WorldError::NoHeldPiece)?;
        Ok(self.incomplete_cells_of(ty).collect())
    }

    /// Candidate objects for the next action: stock slots with an empty hand,
    /// pattern cells while holding.
    pub fn candidates(&self) -> Vec<ObjectId> {
        match self.held {
            None => self.legal_pick_candidates().unwrap_or_default().into_iter().map(ObjectId::Slot).collect(),
            Some(_) => self.legal_place_candidates().unwrap_or_default().into_iter().map(ObjectId::Cell).collect(),
        }
    }

    pub fn apply_pick(&mut self, slot: usize) -> Result<(), WorldError> {
        if self.held.is_some() {
            return Err(WorldError::IllegalPick(slot));
        }
        if slot >= self.stock.len() || self.incomplete_cells_of(self.stock[slot]).next().is_none() {
            return Err(WorldError::IllegalPick(slot));
        }
        self.held = Some((self.stock[slot], Orientation::default()));
        Ok(())
    }

    pub fn rotate_held(&mut self) -> Result<(), WorldError> {
        let held = self.held.as_mut().ok_or(WorldError::NoHeldPiece)?;
        held.1 = held.1.rotated();
        Ok(())
    }

    /// Drops the held piece on `cell`. A completed cell or any type/orientation
    /// mismatch sends the piece back to the stock.
    pub fn apply_place(&mut self, cell: usize) -> Result<PlaceOutcome, WorldError> {
        let held = self.held.ok_or(WorldError::NoHeldPiece)?;
        if cell >= self.model.len() {
            return Err(WorldError::UnknownCell(cell));
        }
        self.held = None;
        if !self.completed[cell] && self.model[cell] == held {
            self.completed[cell] = true;
            Ok(PlaceOutcome::Completed)
        } else {
            Ok(PlaceOutcome::MismatchReturnedToStock)
        }
    }

    pub fn to_record(&self) -> BoardRecord {
        BoardRecord {
            version: BOARD_FORMAT_VERSION,
            seed: self.seed,
            cells: self
                .model
                .iter()
                .zip(&self.completed)
                .enumerate()
                .map(|(i, (&(ty, orient), &completed))| CellRecord { cell_id: i, ty, orient, completed })
                .collect(),
            stock: self.stock.clone(),
            held: self.held.map(|(ty, orient)| HeldRecord { ty, orient }),
        }
    }

    pub fn from_record(rec: BoardRecord) -> Result<Self, WorldError> {
        if rec.version != BOARD_FORMAT_VERSION {
            return Err(WorldError::Version(rec.version));
        }
        if rec.cells.len() != NUM_CELLS {
            return Err(WorldError::InvalidBoard(format!("{} cells", rec.cells.len())));
        }
        if rec.stock.len() != NUM_SLOTS {
            return Err(WorldError::InvalidBoard(format!("{} stock slots", rec.stock.len())));
        }
        let mut counts = [0usize; 4];
        for (i, c) in rec.cells.iter().enumerate() {
            if c.cell_id != i {
                return Err(WorldError::InvalidBoard(format!("cell {i} has id {}", c.cell_id)));
            }
            counts[c.ty.index()] += 1;
        }
        if counts.iter().any(|&n| n != CELLS_PER_TYPE) {
            return Err(WorldError::InvalidBoard(format!("type counts {counts:?}")));
        }
        Ok(BoardState {
            seed: rec.seed,
            model: rec.cells.iter().map(|c| (c.ty, c.orient)).collect(),
            completed: rec.cells.iter().map(|c| c.completed).collect(),
            stock: rec.stock,
            held: rec.held.map(|h| (h.ty, h.orient)),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("board record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, WorldError> {
        let rec: BoardRecord = serde_json::from_str(s).map_err(|e| WorldError::InvalidBoard(e.to_string()))?;
        Self::from_record(rec)
    }
}

impl Serialize for BoardState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoardState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = BoardRecord::deserialize(d)?;
        BoardState::from_record(rec).map_err(serde::de::Error::custom)
    }
}

/// Versioned on-disk board form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardRecord {
    pub version: u32,
    pub seed: u64,
    pub cells: Vec<CellRecord>,
    pub stock: Vec<PieceType>,
    pub held: Option<HeldRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub cell_id: usize,
    #[serde(rename = "type")]
    pub ty: PieceType,
    pub orient: Orientation,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeldRecord {
    #[serde(rename = "type")]
    pub ty: PieceType,
    pub orient: Orientation,
}
