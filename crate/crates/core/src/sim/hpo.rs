use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_training, RunConfig};
use crate::agents::{AgentSpec, NeuralUcbConfig, HIDDEN_GRID};
use crate::error::{invalid, Result};
use crate::features::FeatureSet;

pub const LINUCB_ALPHAS: [f64; 6] = [0.01, 0.1, 1.0, 2.0, 4.0, 10.0];
const NUS: [f64; 3] = [0.1, 1.0, 10.0];
const LAMBDAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const LEARNING_RATES: [f64; 8] = [2e-1, 5e-1, 2e-2, 5e-2, 2e-3, 5e-3, 2e-4, 5e-4];

pub fn linucb_grid() -> Vec<AgentSpec> {
    LINUCB_ALPHAS.iter().map(|&alpha| AgentSpec::Linucb { alpha }).collect()
}

/// Hidden size x nu x lambda x learning rate, in that nesting order.
pub fn neuralucb_grid() -> Vec<AgentSpec> {
    let mut grid = Vec::with_capacity(576);
    for &m in &HIDDEN_GRID {
        for &nu in &NUS {
            for &lambda in &LAMBDAS {
                for &lr in &LEARNING_RATES {
                    grid.push(AgentSpec::Neuralucb(NeuralUcbConfig::new(m, nu, lambda, lr)));
                }
            }
        }
    }
    grid
}

/// Rejects hyperparameters outside the published search spaces.
pub fn validate_grid_point(spec: &AgentSpec) -> Result<()> {
    let member = |v: f64, set: &[f64]| set.iter().any(|s| (s - v).abs() <= 1e-12 * s.abs());
    match spec {
        AgentSpec::Linucb { alpha } => {
            if !member(*alpha, &LINUCB_ALPHAS) {
                return Err(invalid(format!("alpha {alpha} not in the LinUCB grid")));
            }
        }
        AgentSpec::Neuralucb(c) => {
            if !HIDDEN_GRID.contains(&c.hidden) {
                return Err(invalid(format!("hidden size {} not in {HIDDEN_GRID:?}", c.hidden)));
            }
            if !member(c.nu, &NUS) {
                return Err(invalid(format!("nu {} not in the grid", c.nu)));
            }
            if !member(c.lambda, &LAMBDAS) {
                return Err(invalid(format!("lambda {} not in the grid", c.lambda)));
            }
            if !member(c.learning_rate, &LEARNING_RATES) {
                return Err(invalid(format!("learning rate {} not in the grid", c.learning_rate)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub agent: AgentSpec,
    pub mean_train_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: RunConfig,
    pub points: Vec<GridPoint>,
    pub seeds: Vec<u64>,
}

/// Exhaustive search maximizing mean cumulative training reward over
/// `n_seeds` seeds `base.seed, base.seed + 1, ...`; ties go to the earlier
/// grid point.
pub fn grid_search(
    features: &FeatureSet,
    base: &RunConfig,
    grid: &[AgentSpec],
    n_seeds: usize,
    published_only: bool,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(invalid("empty grid"));
    }
    if n_seeds == 0 {
        return Err(invalid("n_seeds must be positive"));
    }
    if published_only {
        grid.iter().try_for_each(validate_grid_point)?;
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| base.seed.wrapping_add(i)).collect();
    let jobs: Vec<(usize, u64)> = (0..grid.len()).flat_map(|g| seeds.iter().map(move |&s| (g, s))).collect();
    let rewards: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, s)| {
            let cfg = RunConfig {
                agent: grid[g].clone(),
                seed: s,
                ..base.clone()
            };
            let records = run_training(features, &cfg)?;
            Ok(records.iter().map(|r| r.reward as f64).sum())
        })
        .collect::<Result<_>>()?;
    let points: Vec<GridPoint> = grid
        .iter()
        .enumerate()
        .map(|(g, agent)| GridPoint {
            agent: agent.clone(),
            mean_train_reward: rewards[g * n_seeds..(g + 1) * n_seeds].iter().sum::<f64>() / n_seeds as f64,
        })
        .collect();
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.mean_train_reward > points[best].mean_train_reward {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best: RunConfig {
            agent: grid[best].clone(),
            ..base.clone()
        },
        points,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::test_support::toy_features;
    use crate::split::SplitSpec;

    fn base() -> RunConfig {
        RunConfig::new(AgentSpec::Linucb { alpha: 1.0 }, SplitSpec::by_session([1], [2]), 0)
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(linucb_grid().len(), 6);
        assert_eq!(neuralucb_grid().len(), 576);
        assert!(neuralucb_grid().iter().all(|p| validate_grid_point(p).is_ok()));
    }

    #[test]
    fn off_grid_points_rejected() {
        let bad = AgentSpec::Neuralucb(NeuralUcbConfig::new(17, 1.0, 1e-2, 2e-3));
        assert!(validate_grid_point(&bad).is_err());
        assert!(validate_grid_point(&AgentSpec::Linucb { alpha: 3.0 }).is_err());
        let fs = toy_features(50, true);
        assert!(grid_search(&fs, &base(), &[bad], 1, true).is_err());
    }

    #[test]
    fn single_point_returned() {
        let fs = toy_features(50, true);
        let grid = [AgentSpec::Linucb { alpha: 4.0 }];
        let r = grid_search(&fs, &base(), &grid, 3, true).unwrap();
        assert_eq!(r.best.agent, grid[0]);
        assert_eq!(r.points.len(), 1);
    }

    #[test]
    fn ties_go_to_grid_order_and_empty_grid_fails() {
        let fs = toy_features(50, true);
        let grid = [AgentSpec::Linucb { alpha: 2.0 }, AgentSpec::Linucb { alpha: 2.0 }];
        let r = grid_search(&fs, &base(), &grid, 1, false).unwrap();
        assert_eq!(r.points[0].mean_train_reward, r.points[1].mean_train_reward);
        assert!(grid_search(&fs, &base(), &[], 1, false).is_err());
    }

    #[test]
    fn picks_highest_reward() {
        let fs = toy_features(100, true);
        let r = grid_search(&fs, &base(), &linucb_grid(), 2, true).unwrap();
        let best = r
            .points
            .iter()
            .map(|p| p.mean_train_reward)
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = r.points.iter().find(|p| p.agent == r.best.agent).unwrap();
        assert_eq!(chosen.mean_train_reward, best);
    }
}
