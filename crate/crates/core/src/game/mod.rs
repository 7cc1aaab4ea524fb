//! Headless snake protocol: path following with injected errors, block
//! structure, event logging and an agent-in-the-loop command source.

mod adapter;
mod engine;
mod grid;
mod path;
mod session;

pub use adapter::{AgentAdapter, AgentDiagnostics};
pub use engine::{Engine, GameState, TrialEvent};
pub use grid::{Cell, Heading, Move, Phase, Turn};
pub use path::{generate_path, PathPlanner, PlannedPath, MIN_GRID};
pub use session::{
    load_events, replay_events, run_session, save_session, CommandSource, EndReason, LogRecord, PerfectFollower,
    ProtocolConfig, ProtocolSession, ScriptedCommands, SessionHeader, SessionLog,
};
