//! Reward derived from a (possibly imperfect) ErrP detector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::types::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrPDetectorModel {
    /// Probability of detecting an ErrP after a wrong action.
    pub tpr: f64,
    /// Probability of detecting an ErrP after a correct action.
    pub fpr: f64,
}

impl Default for ErrPDetectorModel {
    fn default() -> Self {
        Self::PERFECT
    }
}

impl ErrPDetectorModel {
    pub const PERFECT: Self = Self { tpr: 1.0, fpr: 0.0 };

    pub fn new(tpr: f64, fpr: f64) -> Result<Self> {
        let m = Self { tpr, fpr };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tpr", self.tpr), ("fpr", self.fpr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Draws whether an ErrP is detected. Exactly one uniform is consumed per call.
    pub fn detect<R: Rng + ?Sized>(&self, wrong: bool, rng: &mut R) -> bool {
        let p = if wrong { self.tpr } else { self.fpr };
        rng.gen::<f64>() < p
    }
}

/// 1.0 when no ErrP is detected, 0.0 otherwise.
pub fn errp_reward<R: Rng + ?Sized>(true_label: Label, action: Label, model: &ErrPDetectorModel, rng: &mut R) -> f64 {
    if model.detect(action != true_label, rng) {
        0.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_detector_rewards_correct_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = ErrPDetectorModel::PERFECT;
        for t in Label::ALL {
            for a in Label::ALL {
                let r = errp_reward(t, a, &m, &mut rng);
                assert_eq!(r, if t == a { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn detection_rate_matches_tpr() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = ErrPDetectorModel::new(0.8, 0.1).unwrap();
        let detected = (0..10_000)
            .filter(|_| errp_reward(Label::Left, Label::Right, &m, &mut rng) == 0.0)
            .count();
        let frac = detected as f64 / 10_000.0;
        assert!((frac - 0.8).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn equal_rates_make_reward_uninformative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = ErrPDetectorModel::new(0.5, 0.5).unwrap();
        let n = 10_000;
        let wrong: f64 = (0..n).map(|_| errp_reward(Label::Left, Label::Right, &m, &mut rng)).sum::<f64>() / n as f64;
        let right: f64 = (0..n).map(|_| errp_reward(Label::Left, Label::Left, &m, &mut rng)).sum::<f64>() / n as f64;
        assert!((wrong - right).abs() < 0.02);
    }

    #[test]
    fn same_seed_same_sequence() {
        let m = ErrPDetectorModel::new(0.7, 0.3).unwrap();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..100)
                .map(|i| errp_reward(Label::Left, Label::from_index(i % 2).unwrap(), &m, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn rates_outside_unit_interval_rejected() {
        assert!(ErrPDetectorModel::new(1.1, 0.0).is_err());
        assert!(ErrPDetectorModel::new(0.5, -0.1).is_err());
        assert!(ErrPDetectorModel::new(f64::NAN, 0.0).is_err());
    }
}
