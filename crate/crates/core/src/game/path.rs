use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{in_grid, Cell, Heading, Turn};
use crate::error::{invalid, Result};

/// Smallest accepted grid side.
pub const MIN_GRID: i32 = 8;

const DOTS_PER_PATH: (usize, usize) = (3, 6);
const SEGMENT_RUN: (i32, i32) = (2, 5);
const FINAL_RUN: (i32, i32) = (1, 4);
/// Turn-count imbalance at which the minority turn is tried first.
const MAX_IMBALANCE: i64 = 2;
const MAX_EXPANSIONS: usize = 20_000;

/// Turn cells (dots) with the turn expected at each, ending at the fruit.
/// The snake moves straight between consecutive dots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub dots: Vec<Cell>,
    pub turns: Vec<Turn>,
    pub fruit: Cell,
}

impl PlannedPath {
    /// Every cell the head visits after `start` on a `w` x `h` torus, in order.
    pub fn cells(&self, start: Cell, heading: Heading, w: i32, h: i32) -> Vec<Cell> {
        let mut out = Vec::new();
        let (mut pos, mut dir) = (start, heading);
        let targets = self.dots.iter().copied().chain(std::iter::once(self.fruit));
        let turns = self.turns.iter().map(Some).chain(std::iter::once(None));
        for (target, turn) in targets.zip(turns) {
            while pos != target {
                pos = dir.ahead_wrapped(pos, 1, w, h);
                out.push(pos);
            }
            if let Some(t) = turn {
                dir = dir.turned(*t);
            }
        }
        out
    }
}

/// Seeded path generator on a wrapping grid that keeps left and right turns
/// balanced over its lifetime.
#[derive(Debug, Clone)]
pub struct PathPlanner {
    rng: ChaCha8Rng,
    grid: (i32, i32),
    left: u64,
    right: u64,
}

struct Search<'a> {
    grid: (i32, i32),
    body: &'a HashSet<Cell>,
    visited: HashSet<Cell>,
    dots: Vec<Cell>,
    turns: Vec<Turn>,
    n_dots: usize,
    balance: i64,
    expansions: usize,
    safe_sides: bool,
}

impl PathPlanner {
    pub fn new(grid_w: i32, grid_h: i32, seed: u64) -> Result<Self> {
        if grid_w < MIN_GRID || grid_h < MIN_GRID {
            return Err(invalid(format!("grid {grid_w}x{grid_h} smaller than {MIN_GRID}x{MIN_GRID}")));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            grid: (grid_w, grid_h),
            left: 0,
            right: 0,
        })
    }

    pub fn turn_counts(&self) -> (u64, u64) {
        (self.left, self.right)
    }

    /// Plans a self-avoiding path from `start` facing `heading` that avoids
    /// `body`. Dots keep both side cells off the body whenever possible, so
    /// an injected wrong turn does not end the game.
    pub fn plan(&mut self, start: Cell, heading: Heading, body: &[Cell]) -> Result<PlannedPath> {
        let body: HashSet<Cell> = body.iter().copied().filter(|c| *c != start).collect();
        let max_dots = self.rng.gen_range(DOTS_PER_PATH.0..=DOTS_PER_PATH.1);
        let attempts = [true, false]
            .into_iter()
            .flat_map(|safe| (1..=max_dots).rev().map(move |n| (safe, n)));
        for (safe_sides, n_dots) in attempts {
            let mut s = Search {
                grid: self.grid,
                body: &body,
                visited: HashSet::from([start]),
                dots: Vec::new(),
                turns: Vec::new(),
                n_dots,
                balance: self.left as i64 - self.right as i64,
                expansions: 0,
                safe_sides,
            };
            if let Some(fruit) = s.segment(start, heading, true, &mut self.rng) {
                for t in &s.turns {
                    match t {
                        Turn::Left => self.left += 1,
                        Turn::Right => self.right += 1,
                    }
                }
                return Ok(PlannedPath {
                    dots: s.dots,
                    turns: s.turns,
                    fruit,
                });
            }
        }
        Err(invalid("no feasible path from the current position"))
    }
}

impl Search<'_> {
    fn step(&self, from: Cell, heading: Heading, k: i32) -> Cell {
        heading.ahead_wrapped(from, k, self.grid.0, self.grid.1)
    }

    fn free(&self, c: Cell) -> bool {
        !self.body.contains(&c) && !self.visited.contains(&c)
    }

    /// Walks `run` cells ahead, returning them if all are free.
    fn straight(&self, from: Cell, heading: Heading, run: i32) -> Option<Vec<Cell>> {
        let cells: Vec<Cell> = (1..=run).map(|k| self.step(from, heading, k)).collect();
        let distinct = cells.iter().collect::<HashSet<_>>().len() == cells.len();
        (distinct && cells.iter().all(|c| self.free(*c))).then_some(cells)
    }

    fn segment<R: Rng>(&mut self, pos: Cell, heading: Heading, first: bool, rng: &mut R) -> Option<Cell> {
        self.expansions += 1;
        if self.expansions > MAX_EXPANSIONS {
            return None;
        }
        if self.dots.len() == self.n_dots {
            let mut runs: Vec<i32> = (FINAL_RUN.0..=FINAL_RUN.1).collect();
            runs.shuffle(rng);
            return runs
                .into_iter()
                .find_map(|r| self.straight(pos, heading, r).map(|cells| *cells.last().unwrap()));
        }
        let mut runs: Vec<i32> = (SEGMENT_RUN.0..=SEGMENT_RUN.1).collect();
        runs.shuffle(rng);
        if first {
            runs.extend([1, 0]);
        }
        for run in runs {
            let Some(cells) = self.straight(pos, heading, run) else {
                continue;
            };
            let dot = cells.last().copied().unwrap_or(pos);
            let sides_ok = [Turn::Left, Turn::Right]
                .iter()
                .all(|t| !self.body.contains(&self.step(dot, heading.turned(*t), 1)));
            if self.safe_sides && !sides_ok {
                continue;
            }
            let mut order = [Turn::Left, Turn::Right];
            if self.balance >= MAX_IMBALANCE {
                order = [Turn::Right, Turn::Left];
            } else if self.balance > -MAX_IMBALANCE {
                order.shuffle(rng);
            }
            for turn in order {
                let next_heading = heading.turned(turn);
                let next = self.step(dot, next_heading, 1);
                if !self.free(next) || cells.contains(&next) {
                    continue;
                }
                self.visited.extend(cells.iter().copied());
                self.visited.insert(next);
                self.dots.push(dot);
                self.turns.push(turn);
                self.balance += if turn == Turn::Left { 1 } else { -1 };
                if let Some(fruit) = self.segment(next, next_heading, false, rng) {
                    return Some(fruit);
                }
                self.balance -= if turn == Turn::Left { 1 } else { -1 };
                self.turns.pop();
                self.dots.pop();
                self.visited.remove(&next);
                for c in &cells {
                    self.visited.remove(c);
                }
            }
        }
        None
    }
}

/// One path from `start` facing north on a fresh planner seeded with `seed`.
pub fn generate_path(grid_w: i32, grid_h: i32, start: Cell, seed: u64) -> Result<PlannedPath> {
    if !in_grid(start, grid_w, grid_h) {
        return Err(invalid("start outside the grid"));
    }
    PathPlanner::new(grid_w, grid_h, seed)?.plan(start, Heading::North, &[])
}
