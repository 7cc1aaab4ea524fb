use serde::{Deserialize, Serialize};

use crate::types::Label;

/// `[x, y]` with `y` growing downwards.
pub type Cell = [i32; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub fn delta(self) -> Cell {
        match self {
            Heading::North => [0, -1],
            Heading::East => [1, 0],
            Heading::South => [0, 1],
            Heading::West => [-1, 0],
        }
    }

    pub fn turned(self, turn: Turn) -> Heading {
        use Heading::*;
        match (self, turn) {
            (North, Turn::Left) | (South, Turn::Right) => West,
            (North, Turn::Right) | (South, Turn::Left) => East,
            (East, Turn::Left) | (West, Turn::Right) => North,
            (East, Turn::Right) | (West, Turn::Left) => South,
        }
    }

    pub fn ahead(self, cell: Cell, steps: i32) -> Cell {
        let [dx, dy] = self.delta();
        [cell[0] + dx * steps, cell[1] + dy * steps]
    }

    /// As [`Heading::ahead`] on a `w` x `h` torus.
    pub fn ahead_wrapped(self, cell: Cell, steps: i32, w: i32, h: i32) -> Cell {
        let [x, y] = self.ahead(cell, steps);
        [x.rem_euclid(w), y.rem_euclid(h)]
    }
}

/// Turn relative to the current heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Turn {
    Left,
    Right,
}

impl Turn {
    pub fn opposite(self) -> Turn {
        match self {
            Turn::Left => Turn::Right,
            Turn::Right => Turn::Left,
        }
    }

    pub fn label(self) -> Label {
        match self {
            Turn::Left => Label::Left,
            Turn::Right => Label::Right,
        }
    }

    pub fn from_label(label: Label) -> Turn {
        match label {
            Label::Left => Turn::Left,
            Label::Right => Turn::Right,
        }
    }
}

impl std::str::FromStr for Turn {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "left" => Ok(Turn::Left),
            "right" => Ok(Turn::Right),
            other => Err(crate::error::invalid(format!("unknown direction {other}"))),
        }
    }
}

/// Movement executed in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Left,
    Right,
    Forward,
}

impl From<Turn> for Move {
    fn from(t: Turn) -> Move {
        match t {
            Turn::Left => Move::Left,
            Turn::Right => Move::Right,
        }
    }
}

impl Move {
    pub fn turn(self) -> Option<Turn> {
        match self {
            Move::Left => Some(Turn::Left),
            Move::Right => Some(Turn::Right),
            Move::Forward => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Familiarization,
    Main,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Familiarization => "familiarization",
            Phase::Main => "main",
        }
    }
}

pub(crate) fn in_grid(c: Cell, w: i32, h: i32) -> bool {
    (0..w).contains(&c[0]) && (0..h).contains(&c[1])
}
