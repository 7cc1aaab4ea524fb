//! Simulation toolkit for contextual bandits rewarded by error-related
//! potentials in a motor-imagery brain-computer interface.

pub mod agents;
pub mod analysis;
pub mod archive;
pub mod dsp;
pub mod error;
pub mod features;
pub mod game;
pub mod linalg;
pub mod reward;
pub mod sim;
pub mod split;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
