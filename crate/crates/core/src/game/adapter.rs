use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{GameState, TrialEvent};
use super::grid::Turn;
use super::session::{CommandSource, LogRecord};
use crate::agents::{Agent, ContextualBandit, Decision};
use crate::error::{invalid, Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor};
use crate::reward::{errp_reward, ErrPDetectorModel};
use crate::synth::{SynthConfig, TrialGenerator};
use crate::types::Trial;

/// Per-decision agent outcome, logged next to the trial event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDiagnostics {
    pub trial_index: u32,
    pub arm: usize,
    pub ucb: Vec<f64>,
    pub reward: u8,
    pub correct: bool,
}

/// Closes the loop: intended direction -> surrogate motor-imagery trial ->
/// features -> agent action -> executed outcome -> ErrP reward -> update.
pub struct AgentAdapter {
    agent: Agent,
    surrogate: SynthConfig,
    generator: TrialGenerator,
    extractor: FeatureExtractor,
    detector: ErrPDetectorModel,
    noise_rng: ChaCha8Rng,
    reward_rng: ChaCha8Rng,
    pending: Option<(Vec<f64>, Decision, Turn)>,
}

impl AgentAdapter {
    pub fn new(
        agent: Agent,
        surrogate: &SynthConfig,
        features: &FeatureConfig,
        detector: ErrPDetectorModel,
        seed: u64,
    ) -> Result<Self> {
        detector.validate()?;
        let generator = TrialGenerator::new(surrogate)?;
        let extractor = FeatureExtractor::new(features.clone(), surrogate.fs_hz)?;
        if agent.context_dim() != extractor.dim() {
            return Err(Error::DimensionMismatch {
                expected: extractor.dim(),
                got: agent.context_dim(),
            });
        }
        if agent.n_arms() != 2 {
            return Err(invalid("the game needs a two-armed agent"));
        }
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        Ok(Self {
            agent,
            surrogate: surrogate.clone(),
            generator,
            extractor,
            detector,
            noise_rng: stream(3),
            reward_rng: stream(4),
            pending: None,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    /// Synthesizes a trial for the intended direction and lets the agent pick.
    pub fn decide(&mut self, intended: Turn, trial_index: u32) -> Result<Turn> {
        let label = intended.label();
        let trial = Trial {
            data: self.generator.trial(label, false, &mut self.noise_rng),
            label,
            errp_injected: false,
            subject_id: self.surrogate.subject_id.clone(),
            session_id: 1,
            trial_index,
            window_s: self.surrogate.window_s,
            fs_hz: self.surrogate.fs_hz,
        };
        let x = self.extractor.extract(&trial, &self.surrogate.channels)?.values;
        let decision = self.agent.select(&x)?;
        let turn = if decision.arm == 0 { Turn::Left } else { Turn::Right };
        self.pending = Some((x, decision, intended));
        Ok(turn)
    }

    /// Rewards the pending decision from the executed outcome and updates
    /// the agent.
    pub fn feedback(&mut self, event: &TrialEvent) -> Result<AgentDiagnostics> {
        let (x, decision, intended) = self.pending.take().ok_or_else(|| invalid("no pending decision"))?;
        let executed = event
            .executed_direction
            .turn()
            .ok_or_else(|| invalid("feedback needs a decision event"))?;
        let reward = errp_reward(intended.label(), executed.label(), &self.detector, &mut self.reward_rng);
        self.agent.update(&x, decision.arm, reward)?;
        Ok(AgentDiagnostics {
            trial_index: event.trial_index,
            arm: decision.arm,
            ucb: decision.ucb,
            reward: reward as u8,
            correct: decision.arm == intended.label().index(),
        })
    }
}

impl CommandSource for AgentAdapter {
    fn name(&self) -> &str {
        "agent"
    }

    fn command(&mut self, state: &GameState, expected: Turn) -> Result<Option<Turn>> {
        self.decide(expected, state.trial_counter).map(Some)
    }

    fn observe(&mut self, event: &TrialEvent) -> Result<Option<LogRecord>> {
        Ok(Some(LogRecord::Agent(self.feedback(event)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentSpec;

    #[test]
    fn dimension_mismatch_rejected() {
        let agent = AgentSpec::Linucb { alpha: 1.0 }.build(2, 10, 0).unwrap();
        let r = AgentAdapter::new(
            agent,
            &SynthConfig::default(),
            &FeatureConfig::in_house(),
            ErrPDetectorModel::PERFECT,
            0,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
