//! Train/evaluation split policies.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::types::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SplitSpec {
    /// Whole sessions go to one side; order within a session is preserved.
    BySession {
        train_sessions: Vec<u32>,
        eval_sessions: Vec<u32>,
    },
    /// Seeded permutation, then the first `round(n * train_fraction)` trials train.
    ShuffledFraction { train_fraction: f64, seed: u64 },
}

impl SplitSpec {
    pub fn by_session(train: impl Into<Vec<u32>>, eval: impl Into<Vec<u32>>) -> Self {
        SplitSpec::BySession {
            train_sessions: train.into(),
            eval_sessions: eval.into(),
        }
    }

    pub fn shuffled(train_fraction: f64, seed: u64) -> Self {
        SplitSpec::ShuffledFraction {
            train_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SplitSpec::BySession {
                train_sessions,
                eval_sessions,
            } => {
                if train_sessions.is_empty() || eval_sessions.is_empty() {
                    return Err(invalid("session lists must be non-empty"));
                }
                let train: BTreeSet<_> = train_sessions.iter().collect();
                if eval_sessions.iter().any(|s| train.contains(s)) {
                    return Err(invalid("train and eval sessions overlap"));
                }
            }
            SplitSpec::ShuffledFraction { train_fraction, .. } => {
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return Err(invalid(format!(
                        "train fraction {train_fraction} outside (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Splits item positions given each item's session id.
pub fn split_indices(sessions: &[u32], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let (train, eval) = match spec {
        SplitSpec::BySession {
            train_sessions,
            eval_sessions,
        } => {
            let present: BTreeSet<u32> = sessions.iter().copied().collect();
            for s in train_sessions.iter().chain(eval_sessions) {
                if !present.contains(s) {
                    return Err(invalid(format!("session {s} not present")));
                }
            }
            let mut train = Vec::new();
            let mut eval = Vec::new();
            for (i, s) in sessions.iter().enumerate() {
                if train_sessions.contains(s) {
                    train.push(i);
                } else if eval_sessions.contains(s) {
                    eval.push(i);
                } else {
                    return Err(invalid(format!(
                        "session {s} is assigned to neither partition"
                    )));
                }
            }
            (train, eval)
        }
        SplitSpec::ShuffledFraction {
            train_fraction,
            seed,
        } => {
            let n = sessions.len();
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            order.shuffle(&mut rng);
            let n_train = shuffled_train_count(n, *train_fraction);
            let eval = order.split_off(n_train);
            (order, eval)
        }
    };
    if train.is_empty() {
        return Err(Error::EmptyPartition("train"));
    }
    if eval.is_empty() {
        return Err(Error::EmptyPartition("eval"));
    }
    Ok((train, eval))
}

/// `round(n * fraction)` clamped so that both sides keep at least one item.
pub fn shuffled_train_count(n: usize, fraction: f64) -> usize {
    let raw = (n as f64 * fraction).round() as usize;
    raw.min(n.saturating_sub(1)).max(1.min(n))
}

pub fn split_dataset(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let sessions: Vec<u32> = dataset.trials.iter().map(|t| t.session_id).collect();
    let (train, eval) = split_indices(&sessions, spec)?;
    let pick = |idx: &[usize]| dataset.with_trials(idx.iter().map(|&i| dataset.trials[i].clone()).collect());
    Ok((pick(&train), pick(&eval)))
}
