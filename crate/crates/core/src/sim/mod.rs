//! Trial-by-trial streaming of feature vectors through a bandit agent.

mod aggregate;
mod hpo;

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentSpec, ContextualBandit};
use crate::archive::{read_json, read_jsonl, write_json, write_jsonl};
use crate::error::{io_err, Error, Result};
use crate::features::{FeatureConfig, FeatureSet};
use crate::reward::{errp_reward, ErrPDetectorModel};
use crate::split::{split_indices, SplitSpec};
use crate::types::Label;

pub use aggregate::{
    aggregate_seeds, default_n_seeds, half_split_compare, half_split_compare_mean, half_split_errors, SeedAccuracy,
    SummaryStats, MIN_SUBJECTS,
};
pub use hpo::{grid_search, linucb_grid, neuralucb_grid, validate_grid_point, GridPoint, GridSearchResult, LINUCB_ALPHAS};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub agent: AgentSpec,
    #[serde(default)]
    pub detector: ErrPDetectorModel,
    pub split: SplitSpec,
    pub seed: u64,
    /// Keep updating the agent during the evaluation stream.
    #[serde(default = "default_true")]
    pub eval_learning: bool,
    /// When set, the feature set must have been extracted with this config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
}

impl RunConfig {
    pub fn new(agent: AgentSpec, split: SplitSpec, seed: u64) -> Self {
        Self {
            agent,
            detector: ErrPDetectorModel::PERFECT,
            split,
            seed,
            eval_learning: true,
            features: None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Position in the stream.
    pub t: usize,
    pub phase: Phase,
    pub arm: usize,
    pub reward: u8,
    pub correct: bool,
    pub ucb: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub subject_id: String,
    pub seed: u64,
    pub config: RunConfig,
    pub n_train: usize,
    pub n_eval: usize,
    pub accuracy: f64,
    /// Running error count over the whole stream, training first.
    pub cumulative_errors: Vec<u32>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl RunResult {
    pub fn eval_errors(&self) -> u32 {
        let total = self.cumulative_errors.last().copied().unwrap_or(0);
        let train = if self.n_train == 0 {
            0
        } else {
            self.cumulative_errors[self.n_train - 1]
        };
        total - train
    }

    pub fn train_reward(&self) -> f64 {
        self.records
            .iter()
            .filter(|r| r.phase == Phase::Train)
            .map(|r| r.reward as f64)
            .sum()
    }
}

fn reward_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

/// Streams `order` through `agent`, appending one record per trial.
fn stream_phase(
    features: &FeatureSet,
    order: &[usize],
    phase: Phase,
    learn: bool,
    agent: &mut dyn ContextualBandit,
    detector: &ErrPDetectorModel,
    rng: &mut ChaCha8Rng,
    records: &mut Vec<TrialRecord>,
) -> Result<()> {
    for &i in order {
        let x = &features.vectors[i].values;
        let decision = agent.select(x)?;
        let truth = features.records[i].label;
        let action = Label::from_index(decision.arm)?;
        let correct = action == truth;
        let reward = errp_reward(truth, action, detector, rng);
        if learn {
            agent.update(x, decision.arm, reward)?;
        }
        records.push(TrialRecord {
            t: records.len(),
            phase,
            arm: decision.arm,
            reward: reward as u8,
            correct,
            ucb: decision.ucb,
        });
    }
    Ok(())
}

/// Validates the inputs and returns the context dimension.
fn check_inputs(features: &FeatureSet, cfg: &RunConfig) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::EmptyPartition("feature set"));
    }
    cfg.detector.validate()?;
    cfg.split.validate()?;
    if let Some(fc) = &cfg.features {
        if fc != &features.config {
            return Err(crate::error::invalid("feature set was extracted with a different config"));
        }
    }
    let dim = features.vectors[0].dim();
    if let Some(v) = features.vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    Ok(dim)
}

/// Training stream only; returns the records.
pub(crate) fn run_training(features: &FeatureSet, cfg: &RunConfig) -> Result<Vec<TrialRecord>> {
    let dim = check_inputs(features, cfg)?;
    let (train, _) = split_indices(&features.sessions(), &cfg.split)?;
    let mut agent = cfg.agent.build(Label::ALL.len(), dim, cfg.seed)?;
    let mut rng = reward_rng(cfg.seed);
    let mut records = Vec::with_capacity(train.len());
    stream_phase(features, &train, Phase::Train, true, &mut agent, &cfg.detector, &mut rng, &mut records)?;
    Ok(records)
}

/// Trains on the training partition, then evaluates on the evaluation
/// partition. Deterministic given `cfg`.
pub fn run_stream(features: &FeatureSet, cfg: &RunConfig) -> Result<RunResult> {
    let dim = check_inputs(features, cfg)?;
    let (train, eval) = split_indices(&features.sessions(), &cfg.split)?;
    let mut agent = cfg.agent.build(Label::ALL.len(), dim, cfg.seed)?;
    let mut rng = reward_rng(cfg.seed);
    let mut records = Vec::with_capacity(train.len() + eval.len());
    stream_phase(features, &train, Phase::Train, true, &mut agent, &cfg.detector, &mut rng, &mut records)?;
    stream_phase(
        features,
        &eval,
        Phase::Eval,
        cfg.eval_learning,
        &mut agent,
        &cfg.detector,
        &mut rng,
        &mut records,
    )?;

    let mut cumulative_errors = Vec::with_capacity(records.len());
    let mut errors = 0u32;
    for r in &records {
        errors += (!r.correct) as u32;
        cumulative_errors.push(errors);
    }
    let mut result = RunResult {
        subject_id: features.subject_id.clone(),
        seed: cfg.seed,
        config: cfg.clone(),
        n_train: train.len(),
        n_eval: eval.len(),
        accuracy: 0.0,
        cumulative_errors,
        records,
    };
    result.accuracy = 1.0 - result.eval_errors() as f64 / result.n_eval as f64;
    Ok(result)
}

/// Runs the same config over several seeds in parallel; results keep seed order.
pub fn run_seeds(features: &FeatureSet, cfg: &RunConfig, seeds: &[u64]) -> Result<Vec<RunResult>> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| run_stream(features, &cfg.with_seed(s))).collect()
}

/// Writes `summary.json` and `trials.jsonl`.
pub fn save_run_result(result: &RunResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("summary.json"), result)?;
    write_jsonl(&dir.join("trials.jsonl"), &result.records)
}

pub fn load_run_result(dir: &Path) -> Result<RunResult> {
    let mut result: RunResult = read_json(&dir.join("summary.json"))?;
    result.records = read_jsonl(&dir.join("trials.jsonl"))?;
    Ok(result)
}
