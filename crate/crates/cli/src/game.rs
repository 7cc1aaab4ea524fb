use anyhow::{bail, Context, Result};
use errp_bandit::features::FeatureConfig;
use errp_bandit::game::{
    load_events, replay_events, run_session, save_session, AgentAdapter, CommandSource, EndReason, GameState,
    LogRecord, PerfectFollower, ProtocolConfig, SessionHeader, TrialEvent, Turn,
};
use errp_bandit::synth::SynthConfig;
use serde::Serialize;

use crate::args::{AgentArgs, DetectorArgs, GameSimArgs, PlayerKind, ProtocolArgs, ReplayArgs};
use crate::output::{emit_json, load_json, resolve_seed, save_json, write_snapshot};
use crate::run::detector;
use crate::usage;

pub fn protocol_config(args: &ProtocolArgs) -> Result<ProtocolConfig> {
    let mut cfg: ProtocolConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => ProtocolConfig::default(),
    };
    if let Some(v) = args.error_rate {
        cfg.error_rate = v;
    }
    if let Some(v) = args.familiarization_trials {
        cfg.familiarization_trials = v;
    }
    if let Some(v) = args.trials_per_block {
        cfg.trials_per_block = v;
    }
    if let Some(v) = args.blocks {
        cfg.n_blocks = v;
    }
    cfg.seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// Agent player decoding surrogate trials generated from the intended turn.
pub fn agent_player(agent: &AgentArgs, det: &DetectorArgs, separability: f64, seed: u64) -> Result<AgentAdapter> {
    let features = FeatureConfig::in_house();
    let surrogate = SynthConfig {
        separability,
        seed,
        ..SynthConfig::default()
    };
    surrogate.validate().map_err(|e| usage(e.to_string()))?;
    let built = agent.spec().build(2, features.dim(), seed).map_err(|e| usage(e.to_string()))?;
    Ok(AgentAdapter::new(built, &surrogate, &features, detector(det)?, seed)?)
}

/// Wraps a source so it stops at the break after `stop`.
struct StopAfter<'a> {
    inner: &'a mut dyn CommandSource,
    stop: Option<u32>,
}

impl CommandSource for StopAfter<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn command(&mut self, state: &GameState, expected: Turn) -> errp_bandit::Result<Option<Turn>> {
        self.inner.command(state, expected)
    }

    fn observe(&mut self, event: &TrialEvent) -> errp_bandit::Result<Option<LogRecord>> {
        self.inner.observe(event)
    }

    fn continue_after_block(&mut self, block: u32) -> bool {
        self.stop != Some(block) && self.inner.continue_after_block(block)
    }
}

#[derive(Serialize)]
struct GameSummary {
    end_reason: Option<EndReason>,
    n_trials: u32,
    decisions: usize,
    injected: usize,
    injected_fraction: f64,
    familiarization_injected: usize,
    score: u32,
    agent_accuracy: Option<f64>,
}

#[derive(Serialize)]
struct GameResolved<'a> {
    protocol: &'a ProtocolConfig,
    player: PlayerKind,
}

pub fn game_sim(args: GameSimArgs) -> Result<()> {
    let cfg = protocol_config(&args.protocol)?;
    let mut follower = PerfectFollower::default();
    let mut adapter;
    let inner: &mut dyn CommandSource = match args.player {
        PlayerKind::Perfect => &mut follower,
        PlayerKind::Agent => {
            adapter = agent_player(&args.agent, &args.detector, args.separability, cfg.seed)?;
            &mut adapter
        }
    };
    let mut source = StopAfter {
        inner,
        stop: args.stop_after_block,
    };
    let mut log = run_session(&cfg, &mut source)?;
    log.header.participant = args.participant.clone();
    save_session(&args.out, &log.header, &log.records)?;

    let decisions: Vec<&TrialEvent> = log.trial_events().filter(|e| !e.auto_forward).collect();
    let main: Vec<&&TrialEvent> = decisions.iter().filter(|e| e.block > 0).collect();
    let injected = main.iter().filter(|e| e.error_injected).count();
    let correct: Vec<bool> = log
        .records
        .iter()
        .filter_map(|r| match r {
            LogRecord::Agent(d) => Some(d.correct),
            _ => None,
        })
        .collect();
    let end_reason = log.records.iter().rev().find_map(|r| match r {
        LogRecord::SessionEnd { reason, .. } => Some(*reason),
        _ => None,
    });
    let summary = GameSummary {
        end_reason,
        n_trials: log.final_state.trial_counter,
        decisions: decisions.len(),
        injected,
        injected_fraction: if main.is_empty() { 0.0 } else { injected as f64 / main.len() as f64 },
        familiarization_injected: decisions.iter().filter(|e| e.block == 0 && e.error_injected).count(),
        score: log.final_state.score,
        agent_accuracy: (!correct.is_empty())
            .then(|| correct.iter().filter(|c| **c).count() as f64 / correct.len() as f64),
    };
    save_json(&args.out.join("summary.json"), &summary)?;
    write_snapshot(&args.out, "game-sim", &args, &GameResolved { protocol: &cfg, player: args.player })?;
    eprintln!(
        "{} decisions, {} injected ({:.4}), score {}",
        summary.decisions, summary.injected, summary.injected_fraction, summary.score
    );
    Ok(())
}

#[derive(Serialize)]
struct ReplayReport {
    reproduced: bool,
    trial_events: usize,
    final_state: Option<GameState>,
}

pub fn replay(args: ReplayArgs) -> Result<()> {
    let header: SessionHeader = load_json(&args.session.join("session.json"))?;
    let records = load_events(&args.session.join("events.jsonl"))
        .with_context(|| format!("reading events in {}", args.session.display()))?;
    let states = replay_events(&header.config, &records)?;
    if let Some(LogRecord::SessionEnd { n_trials, .. }) = records.last() {
        let replayed = states.last().map(|s| s.trial_counter).unwrap_or(0);
        if *n_trials != replayed {
            bail!("session end reports {n_trials} trials but replay reached {replayed}");
        }
    }
    emit_json(
        args.out.as_deref(),
        &ReplayReport {
            reproduced: true,
            trial_events: states.len(),
            final_state: states.last().cloned(),
        },
    )
}
