//! The block-copy task: board geometry, piece types and orientations, and the
//! pick/place rules.

mod board;
mod layout;

pub use board::{BoardRecord, BoardState, CellRecord, HeldRecord, PlaceOutcome, BOARD_FORMAT_VERSION};
pub use layout::BoardLayout;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const NUM_TYPES: usize = 4;
pub const NUM_CELLS: usize = 24;
pub const NUM_SLOTS: usize = 4;
pub const CELLS_PER_TYPE: usize = 6;
pub const PRECOMPLETED: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("a piece is already held")]
    HeldPiece,
    #[error("no piece is held")]
    NoHeldPiece,
    #[error("illegal pick from stock slot {0}")]
    IllegalPick(usize),
    #[error("no such cell {0}")]
    UnknownCell(usize),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid board record: {0}")]
    InvalidBoard(String),
    #[error("unsupported board format version {0}")]
    Version(u32),
}

/// One of the four black/white block patterns, `1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PieceType(u8);

impl PieceType {
    pub const ALL: [PieceType; NUM_TYPES] = [PieceType(1), PieceType(2), PieceType(3), PieceType(4)];

    pub fn new(id: u8) -> Option<Self> {
        (1..=NUM_TYPES as u8).contains(&id).then_some(PieceType(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u8> for PieceType {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        PieceType::new(v).ok_or_else(|| format!("piece type {v} outside 1..=4"))
    }
}

impl From<PieceType> for u8 {
    fn from(p: PieceType) -> u8 {
        p.0
    }
}

/// Rotation in quarter turns, `0..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Orientation(u8);

impl Orientation {
    pub fn new(quarter_turns: u8) -> Option<Self> {
        (quarter_turns < 4).then_some(Orientation(quarter_turns))
    }

    pub fn quarter_turns(self) -> u8 {
        self.0
    }

    pub fn rotated(self) -> Self {
        Orientation((self.0 + 1) % 4)
    }

    /// Number of single rotations needed to go from `self` to `target`.
    pub fn turns_to(self, target: Orientation) -> u8 {
        (target.0 + 4 - self.0) % 4
    }
}

impl TryFrom<u8> for Orientation {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Orientation::new(v).ok_or_else(|| format!("orientation {v} outside 0..=3"))
    }
}

impl From<Orientation> for u8 {
    fn from(o: Orientation) -> u8 {
        o.0
    }
}

/// Which decision an episode or prediction concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Pick,
    Place,
}

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Pick => "pick",
            ActionKind::Place => "place",
        }
    }
}

impl FromStr for ActionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pick" => Ok(ActionKind::Pick),
            "place" => Ok(ActionKind::Place),
            _ => Err(format!("unknown action kind {s:?}")),
        }
    }
}

/// Addressable object on the board. Stock slots order before pattern cells,
/// which gives the lowest-id tie-break its meaning.
///
/// Serialized as `"slot:N"` / `"cell:N"` so it can key JSON maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectId {
    Slot(usize),
    Cell(usize),
}

impl ObjectId {
    pub fn slot(self) -> Option<usize> {
        match self {
            ObjectId::Slot(s) => Some(s),
            ObjectId::Cell(_) => None,
        }
    }

    pub fn cell(self) -> Option<usize> {
        match self {
            ObjectId::Cell(c) => Some(c),
            ObjectId::Slot(_) => None,
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectId::Slot(s) => write!(f, "slot:{s}"),
            ObjectId::Cell(c) => write!(f, "cell:{c}"),
        }
    }
}

impl FromStr for ObjectId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, idx) = s.split_once(':').ok_or_else(|| format!("bad object id {s:?}"))?;
        let idx: usize = idx.parse().map_err(|_| format!("bad object index in {s:?}"))?;
        match kind {
            "slot" => Ok(ObjectId::Slot(idx)),
            "cell" => Ok(ObjectId::Cell(idx)),
            _ => Err(format!("bad object kind in {s:?}")),
        }
    }
}

impl Serialize for ObjectId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_cycles_with_period_four() {
        let o = Orientation::new(3).unwrap();
        assert_eq!(o.rotated(), Orientation::new(0).unwrap());
        let mut r = Orientation::new(1).unwrap();
        for _ in 0..4 {
            r = r.rotated();
        }
        assert_eq!(r, Orientation::new(1).unwrap());
        assert_eq!(Orientation::new(1).unwrap().turns_to(Orientation::new(0).unwrap()), 3);
        assert!(Orientation::new(4).is_none());
    }

    #[test]
    fn exactly_four_piece_types() {
        assert_eq!(PieceType::ALL.len(), 4);
        assert!(PieceType::new(0).is_none());
        assert!(PieceType::new(5).is_none());
    }

    #[test]
    fn object_ids_order_and_roundtrip() {
        assert!(ObjectId::Slot(3) < ObjectId::Cell(0));
        assert!(ObjectId::Cell(2) < ObjectId::Cell(10));
        for id in [ObjectId::Slot(2), ObjectId::Cell(17)] {
            let s = serde_json::to_string(&id).unwrap();
            assert_eq!(serde_json::from_str::<ObjectId>(&s).unwrap(), id);
        }
        assert!("stock:1".parse::<ObjectId>().is_err());
    }
}
