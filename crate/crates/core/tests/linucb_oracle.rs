use approx::assert_relative_eq;
use errp_bandit::agents::{ContextualBandit, LinUcb};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct ridge solution `(I + X^T X)^-1 X^T r`.
fn ridge(rows: &[Vec<f64>], rewards: &[f64], d: usize) -> DVector<f64> {
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let a = DMatrix::identity(d, d) + x.transpose() * &x;
    let b = x.transpose() * DVector::from_column_slice(rewards);
    a.cholesky().expect("A is SPD").solve(&b)
}

fn relative_error(got: &[f64], want: &DVector<f64>) -> f64 {
    let diff: f64 = got.iter().zip(want.iter()).map(|(g, w)| (g - w).powi(2)).sum::<f64>().sqrt();
    diff / want.norm().max(1e-300)
}

/// Drives the agent with its own choices and records each arm's history.
fn play(agent: &mut LinUcb, n: usize, d: usize, seed: u64) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = vec![(Vec::new(), Vec::new()); agent.n_arms()];
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let arm = agent.select(&x).unwrap().arm;
        let reward = if rng.gen::<f64>() < 0.6 { 1.0 } else { 0.0 };
        agent.update(&x, arm, reward).unwrap();
        history[arm].0.push(x);
        history[arm].1.push(reward);
    }
    history
}

#[test]
fn theta_matches_ridge_after_500_updates() {
    let d = 64;
    for threshold in [(d / 2), 0, usize::MAX] {
        let mut agent = LinUcb::new(2, d, 1.0).unwrap().with_dense_threshold(threshold);
        let history = play(&mut agent, 500, d, 11);
        for (arm, (rows, rewards)) in history.iter().enumerate() {
            assert!(!rows.is_empty());
            let want = ridge(rows, rewards, d);
            let err = relative_error(&agent.theta(arm), &want);
            assert!(err <= 1e-6, "threshold {threshold} arm {arm} relative error {err}");
        }
    }
}

#[test]
fn widths_match_direct_inverse() {
    let d = 16;
    let mut agent = LinUcb::new(2, d, 2.0).unwrap();
    let history = play(&mut agent, 200, d, 3);
    let probe: Vec<f64> = (0..d).map(|i| (i as f64 * 0.37).sin()).collect();
    let decision = agent.select(&probe).unwrap();
    for (arm, (rows, rewards)) in history.iter().enumerate() {
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        let a = DMatrix::identity(d, d) + x.transpose() * &x;
        let p = DVector::from_column_slice(&probe);
        let width = 2.0 * (p.transpose() * a.try_inverse().unwrap() * &p)[(0, 0)].sqrt();
        let score = ridge(rows, rewards, d).dot(&p);
        assert_relative_eq!(decision.widths[arm], width, max_relative = 1e-9);
        assert_relative_eq!(decision.scores[arm], score, max_relative = 1e-9, epsilon = 1e-12);
    }
}

#[test]
fn inverse_stays_accurate_over_10k_updates() {
    let d = 8;
    let mut agent = LinUcb::new(2, d, 1.0).unwrap().with_dense_threshold(0);
    let history = play(&mut agent, 10_000, d, 5);
    for (arm, (rows, rewards)) in history.iter().enumerate() {
        assert!(agent.is_dense(arm));
        assert!(agent.inverse_drift(arm) < 1e-9, "drift {}", agent.inverse_drift(arm));
        assert!(relative_error(&agent.theta(arm), &ridge(rows, rewards, d)) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_history_matches_ridge(d in 1usize..12, n in 1usize..60, seed in any::<u64>(), threshold in 0usize..20) {
        let mut agent = LinUcb::new(2, d, 0.5).unwrap().with_dense_threshold(threshold);
        let history = play(&mut agent, n, d, seed);
        for (arm, (rows, rewards)) in history.iter().enumerate() {
            if rows.is_empty() {
                prop_assert!(agent.theta(arm).iter().all(|v| *v == 0.0));
                continue;
            }
            let want = ridge(rows, rewards, d);
            if want.norm() > 1e-9 {
                prop_assert!(relative_error(&agent.theta(arm), &want) < 1e-8);
            }
        }
    }
}
