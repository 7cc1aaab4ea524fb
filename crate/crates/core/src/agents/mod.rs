//! Contextual bandit agents behind one select/update interface.

mod checkpoint;
mod linucb;
mod neural;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use linucb::{LinUcb, DEFAULT_RECOMPUTE_EVERY};
pub use neural::{NeuralUcb, NeuralUcbConfig, HIDDEN_GRID};

use crate::error::{Error, Result};

/// Outcome of one selection, with the per-arm terms of the UCB rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub arm: usize,
    pub scores: Vec<f64>,
    pub widths: Vec<f64>,
    pub ucb: Vec<f64>,
}

impl Decision {
    /// Picks `argmax(score + width)`, lowest index on ties.
    pub fn from_terms(scores: Vec<f64>, widths: Vec<f64>) -> Self {
        let ucb: Vec<f64> = scores.iter().zip(&widths).map(|(s, w)| s + w).collect();
        let mut arm = 0;
        for (i, &u) in ucb.iter().enumerate().skip(1) {
            if u > ucb[arm] {
                arm = i;
            }
        }
        Self {
            arm,
            scores,
            widths,
            ucb,
        }
    }
}

pub trait ContextualBandit: Send {
    fn n_arms(&self) -> usize;
    fn context_dim(&self) -> usize;
    /// Scores every arm for context `x`; never mutates the agent.
    fn select(&self, x: &[f64]) -> Result<Decision>;
    /// Incorporates the reward observed for `arm` under context `x`.
    fn update(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()>;
}

/// Agent family and hyperparameters, as stored in run configs and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgentSpec {
    Linucb { alpha: f64 },
    Neuralucb(NeuralUcbConfig),
}

impl AgentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AgentSpec::Linucb { .. } => "linucb",
            AgentSpec::Neuralucb(_) => "neuralucb",
        }
    }

    pub fn build(&self, n_arms: usize, dim: usize, seed: u64) -> Result<Agent> {
        Ok(match self {
            AgentSpec::Linucb { alpha } => Agent::LinUcb(LinUcb::new(n_arms, dim, *alpha)?.with_seed(seed)),
            AgentSpec::Neuralucb(cfg) => Agent::NeuralUcb(NeuralUcb::new(cfg.clone(), n_arms, dim, seed)?),
        })
    }
}

/// Either agent family, dispatched statically.
#[derive(Debug, Clone)]
pub enum Agent {
    LinUcb(LinUcb),
    NeuralUcb(NeuralUcb),
}

impl Agent {
    pub fn spec(&self) -> AgentSpec {
        match self {
            Agent::LinUcb(a) => AgentSpec::Linucb { alpha: a.alpha() },
            Agent::NeuralUcb(a) => AgentSpec::Neuralucb(a.config().clone()),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Agent::LinUcb(a) => a.seed(),
            Agent::NeuralUcb(a) => a.seed(),
        }
    }
}

impl ContextualBandit for Agent {
    fn n_arms(&self) -> usize {
        match self {
            Agent::LinUcb(a) => a.n_arms(),
            Agent::NeuralUcb(a) => a.n_arms(),
        }
    }

    fn context_dim(&self) -> usize {
        match self {
            Agent::LinUcb(a) => a.context_dim(),
            Agent::NeuralUcb(a) => a.context_dim(),
        }
    }

    fn select(&self, x: &[f64]) -> Result<Decision> {
        match self {
            Agent::LinUcb(a) => a.select(x),
            Agent::NeuralUcb(a) => a.select(x),
        }
    }

    fn update(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        match self {
            Agent::LinUcb(a) => a.update(x, arm, reward),
            Agent::NeuralUcb(a) => a.update(x, arm, reward),
        }
    }
}

pub(crate) fn check_context(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    crate::types::check_finite(x, "context")
}

pub(crate) fn check_arm(arm: usize, n_arms: usize) -> Result<()> {
    if arm >= n_arms {
        return Err(crate::error::invalid(format!("arm {arm} outside [0, {n_arms})")));
    }
    Ok(())
}

pub(crate) fn check_reward(reward: f64) -> Result<()> {
    if !reward.is_finite() {
        return Err(Error::NonFinite("reward"));
    }
    Ok(())
}
