use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, Heading, Move, Phase, Turn};
use super::path::PathPlanner;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub grid_w: i32,
    pub grid_h: i32,
    /// Head first.
    pub snake: Vec<Cell>,
    pub heading: Heading,
    /// Remaining dots; the snake turns at each.
    pub path: Vec<Cell>,
    /// Expected turn at each remaining dot.
    pub turns: Vec<Turn>,
    pub fruit: Cell,
    pub score: u32,
    pub phase: Phase,
    pub trial_counter: u32,
    pub block_counter: u32,
    pub step_counter: u64,
    pub alive: bool,
}

impl GameState {
    pub fn head(&self) -> Cell {
        self.snake[0]
    }

    /// The head sits on a dot and the next step needs a command.
    pub fn at_decision(&self) -> bool {
        self.alive && self.path.first() == Some(&self.head())
    }

    pub fn expected_turn(&self) -> Option<Turn> {
        self.at_decision().then(|| self.turns[0])
    }
}

/// One logged step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub timestamp_ms: u64,
    pub trial_index: u32,
    pub expected_direction: Move,
    pub issued_command: Option<Turn>,
    pub executed_direction: Move,
    pub error_injected: bool,
    pub auto_forward: bool,
    pub phase: Phase,
    pub block: u32,
}

/// Single-writer game engine on a grid whose edges wrap around. Path
/// planning and error injection draw from separate seeded streams.
#[derive(Debug, Clone)]
pub struct Engine {
    state: GameState,
    planner: PathPlanner,
    error_rng: ChaCha8Rng,
    step_period_ms: u64,
}

impl Engine {
    pub fn new(grid_w: i32, grid_h: i32, snake_len: usize, step_period_ms: u64, seed: u64) -> Result<Self> {
        let mut planner = PathPlanner::new(grid_w, grid_h, seed)?;
        if snake_len == 0 || snake_len as i32 > grid_h / 2 {
            return Err(invalid(format!("snake length {snake_len} does not fit the grid")));
        }
        if step_period_ms == 0 {
            return Err(invalid("step period must be positive"));
        }
        let head = [grid_w / 2, grid_h / 2];
        let snake: Vec<Cell> = (0..snake_len as i32).map(|k| [head[0], head[1] + k]).collect();
        let plan = planner.plan(head, Heading::North, &snake)?;
        let mut error_rng = ChaCha8Rng::seed_from_u64(seed);
        error_rng.set_stream(1);
        Ok(Self {
            state: GameState {
                grid_w,
                grid_h,
                snake,
                heading: Heading::North,
                path: plan.dots,
                turns: plan.turns,
                fruit: plan.fruit,
                score: 0,
                phase: Phase::Familiarization,
                trial_counter: 0,
                block_counter: 0,
                step_counter: 0,
                alive: true,
            },
            planner,
            error_rng,
            step_period_ms,
        })
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn planner(&self) -> &PathPlanner {
        &self.planner
    }

    pub fn set_phase(&mut self, phase: Phase, block: u32) {
        self.state.phase = phase;
        self.state.block_counter = block;
    }

    /// Advances one cell. At a decision point `command` is required and is
    /// replaced by the opposite of the expected turn with probability
    /// `error_rate`; elsewhere the snake moves forward and `command` is
    /// ignored. Exactly one uniform is drawn per decision.
    pub fn step(&mut self, command: Option<Turn>, error_rate: f64) -> Result<TrialEvent> {
        if !self.state.alive {
            return Err(Error::GameOver);
        }
        if !(0.0..=1.0).contains(&error_rate) {
            return Err(invalid(format!("error rate {error_rate} outside [0, 1]")));
        }
        let timestamp_ms = self.state.step_counter * self.step_period_ms;
        let event = if let Some(expected) = self.state.expected_turn() {
            let issued = command.ok_or_else(|| invalid("decision point requires a command"))?;
            let injected = self.error_rng.gen::<f64>() < error_rate;
            let executed = if injected { expected.opposite() } else { issued };
            let trial_index = self.state.trial_counter;
            self.state.trial_counter += 1;
            self.state.heading = self.state.heading.turned(executed);
            self.state.path.remove(0);
            self.state.turns.remove(0);
            self.advance(executed != expected)?;
            TrialEvent {
                timestamp_ms,
                trial_index,
                expected_direction: expected.into(),
                issued_command: Some(issued),
                executed_direction: executed.into(),
                error_injected: injected,
                auto_forward: false,
                phase: self.state.phase,
                block: self.state.block_counter,
            }
        } else {
            self.advance(false)?;
            TrialEvent {
                timestamp_ms,
                trial_index: self.state.trial_counter,
                expected_direction: Move::Forward,
                issued_command: None,
                executed_direction: Move::Forward,
                error_injected: false,
                auto_forward: true,
                phase: self.state.phase,
                block: self.state.block_counter,
            }
        };
        self.state.step_counter += 1;
        Ok(event)
    }

    fn advance(&mut self, off_path: bool) -> Result<()> {
        let s = &mut self.state;
        let next = s.heading.ahead_wrapped(s.head(), 1, s.grid_w, s.grid_h);
        let body = &s.snake[..s.snake.len() - 1];
        if body.contains(&next) {
            s.alive = false;
            return Ok(());
        }
        s.snake.insert(0, next);
        s.snake.pop();
        if next == s.fruit {
            s.score += 1;
            self.replan()
        } else if off_path {
            self.replan()
        } else {
            Ok(())
        }
    }

    fn replan(&mut self) -> Result<()> {
        let s = &mut self.state;
        match self.planner.plan(s.head(), s.heading, &s.snake) {
            Ok(plan) => {
                s.path = plan.dots;
                s.turns = plan.turns;
                s.fruit = plan.fruit;
            }
            Err(_) => s.alive = false,
        }
        Ok(())
    }
}
