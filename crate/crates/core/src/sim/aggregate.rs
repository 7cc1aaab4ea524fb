use serde::{Deserialize, Serialize};

use super::{Phase, RunResult};
use crate::agents::AgentSpec;
use crate::error::{invalid, Result};
use crate::stats::{wilcoxon_signed_rank, Alternative, TestResult};

/// Fewest subjects accepted by the half-split comparison.
pub const MIN_SUBJECTS: usize = 5;

/// Seeds per run: five for LinUCB, ten for NeuralUCB.
pub fn default_n_seeds(agent: &AgentSpec) -> usize {
    match agent {
        AgentSpec::Linucb { .. } => 5,
        AgentSpec::Neuralucb(_) => 10,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAccuracy {
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub subject_id: String,
    pub n_seeds: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation (zero for a single seed).
    pub std_accuracy: f64,
    pub mean_cumulative_errors: Vec<f64>,
    pub per_seed: Vec<SeedAccuracy>,
}

pub fn aggregate_seeds(results: &[RunResult]) -> Result<SummaryStats> {
    let first = results.first().ok_or_else(|| invalid("no results to aggregate"))?;
    let reference = first.config.with_seed(0);
    for r in results {
        if r.config.with_seed(0) != reference || r.subject_id != first.subject_id {
            return Err(invalid("results come from mixed configs"));
        }
        if r.cumulative_errors.len() != first.cumulative_errors.len() {
            return Err(invalid("results have different stream lengths"));
        }
    }
    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.accuracy).sum::<f64>() / n;
    let std = if results.len() > 1 {
        (results.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut curve = vec![0.0; first.cumulative_errors.len()];
    for r in results {
        for (c, e) in curve.iter_mut().zip(&r.cumulative_errors) {
            *c += *e as f64;
        }
    }
    curve.iter_mut().for_each(|c| *c /= n);
    Ok(SummaryStats {
        subject_id: first.subject_id.clone(),
        n_seeds: results.len(),
        mean_accuracy: mean,
        std_accuracy: std,
        mean_cumulative_errors: curve,
        per_seed: results
            .iter()
            .map(|r| SeedAccuracy {
                seed: r.seed,
                accuracy: r.accuracy,
            })
            .collect(),
    })
}

/// Errors in the first and second half of the training stream. With an odd
/// count the middle trial goes to the second half.
pub fn half_split_errors(result: &RunResult) -> (u32, u32) {
    let train: Vec<bool> = result
        .records
        .iter()
        .filter(|r| r.phase == Phase::Train)
        .map(|r| r.correct)
        .collect();
    let half = train.len() / 2;
    let count = |s: &[bool]| s.iter().filter(|c| !**c).count() as u32;
    (count(&train[..half]), count(&train[half..]))
}

fn compare(first: Vec<f64>, second: Vec<f64>) -> Result<TestResult> {
    if first.len() < MIN_SUBJECTS {
        return Err(invalid(format!(
            "fewer than {MIN_SUBJECTS} paired observations ({})",
            first.len()
        )));
    }
    wilcoxon_signed_rank(&second, &first, Alternative::Less)
}

/// One-sided signed-rank test that second-half training errors are smaller
/// than first-half errors, one result per subject.
pub fn half_split_compare(results_per_subject: &[RunResult]) -> Result<TestResult> {
    let (first, second) = results_per_subject
        .iter()
        .map(|r| {
            let (a, b) = half_split_errors(r);
            (a as f64, b as f64)
        })
        .unzip();
    compare(first, second)
}

/// As [`half_split_compare`], with each subject's errors averaged over its seeds.
pub fn half_split_compare_mean(runs_per_subject: &[Vec<RunResult>]) -> Result<TestResult> {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for runs in runs_per_subject {
        if runs.is_empty() {
            return Err(invalid("subject without runs"));
        }
        let n = runs.len() as f64;
        let (a, b) = runs.iter().map(half_split_errors).fold((0.0, 0.0), |(x, y), (a, b)| {
            (x + a as f64, y + b as f64)
        });
        first.push(a / n);
        second.push(b / n);
    }
    compare(first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::sim::{RunConfig, TrialRecord};
    use crate::split::SplitSpec;

    fn fake(seed: u64, accuracy: f64, train_correct: &[bool]) -> RunResult {
        let records: Vec<TrialRecord> = train_correct
            .iter()
            .enumerate()
            .map(|(t, &c)| TrialRecord {
                t,
                phase: Phase::Train,
                arm: 0,
                reward: c as u8,
                correct: c,
                ucb: vec![0.0, 0.0],
            })
            .collect();
        let mut errors = 0;
        let cumulative_errors = train_correct
            .iter()
            .map(|c| {
                errors += (!c) as u32;
                errors
            })
            .collect();
        RunResult {
            subject_id: "s".into(),
            seed,
            config: RunConfig::new(AgentSpec::Linucb { alpha: 1.0 }, SplitSpec::by_session([1], [2]), seed),
            n_train: train_correct.len(),
            n_eval: 0,
            accuracy,
            cumulative_errors,
            records,
        }
    }

    #[test]
    fn identical_seeds_have_zero_spread() {
        let runs: Vec<_> = (0..10).map(|_| fake(1, 0.75, &[true, false])).collect();
        let s = aggregate_seeds(&runs).unwrap();
        assert_eq!(s.std_accuracy, 0.0);
        assert_eq!(s.mean_accuracy, 0.75);
        assert_eq!(s.mean_cumulative_errors, vec![0.0, 1.0]);
    }

    #[test]
    fn mean_of_three() {
        let runs: Vec<_> = [0.7, 0.8, 0.9]
            .iter()
            .enumerate()
            .map(|(i, a)| fake(i as u64, *a, &[true]))
            .collect();
        assert!((aggregate_seeds(&runs).unwrap().mean_accuracy - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mixed_configs_rejected() {
        let mut b = fake(1, 0.5, &[true]);
        b.config.agent = AgentSpec::Linucb { alpha: 2.0 };
        assert!(aggregate_seeds(&[fake(0, 0.5, &[true]), b]).is_err());
        assert!(aggregate_seeds(&[]).is_err());
    }

    #[test]
    fn seed_defaults() {
        assert_eq!(default_n_seeds(&AgentSpec::Linucb { alpha: 1.0 }), 5);
        let cfg = crate::agents::NeuralUcbConfig::new(16, 1.0, 0.01, 0.01);
        assert_eq!(default_n_seeds(&AgentSpec::Neuralucb(cfg)), 10);
    }

    #[test]
    fn learning_subjects_detected() {
        let runs: Vec<_> = (0..9)
            .map(|i| {
                let mut c = vec![true; 40];
                for k in 0..(5 + i % 3) {
                    c[k * 3] = false;
                }
                c[30] = i % 2 == 0;
                fake(0, 0.0, &c)
            })
            .collect();
        let r = half_split_compare(&runs).unwrap();
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn identical_halves_are_degenerate() {
        let runs: Vec<_> = (0..6).map(|_| fake(0, 0.0, &[false, true, false, true])).collect();
        assert!(matches!(half_split_compare(&runs), Err(Error::AllZeroDifferences)));
    }

    #[test]
    fn anti_learning_not_significant() {
        let runs: Vec<_> = (0..7)
            .map(|i| {
                let mut c = vec![true; 20];
                for k in 0..(3 + i % 2) {
                    c[19 - k] = false;
                }
                fake(0, 0.0, &c)
            })
            .collect();
        assert!(half_split_compare(&runs).unwrap().p_value > 0.5);
    }

    #[test]
    fn too_few_subjects() {
        let runs: Vec<_> = (0..4).map(|_| fake(0, 0.0, &[false, true])).collect();
        assert!(half_split_compare(&runs).is_err());
    }
}
