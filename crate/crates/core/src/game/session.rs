use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adapter::AgentDiagnostics;
use super::engine::{Engine, GameState, TrialEvent};
use super::grid::{Phase, Turn};
use super::path::MIN_GRID;
use crate::archive::{read_jsonl, write_json, write_jsonl, FORMAT_VERSION};
use crate::error::{invalid, io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub error_rate: f64,
    pub familiarization_error_rate: f64,
    /// Decision trials in the familiarization block; zero skips it.
    pub familiarization_trials: usize,
    pub trials_per_block: usize,
    pub n_blocks: u32,
    pub step_period_ms: u64,
    pub grid_w: i32,
    pub grid_h: i32,
    pub snake_len: usize,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            error_rate: 0.05,
            familiarization_error_rate: 0.0,
            familiarization_trials: 20,
            trials_per_block: 120,
            n_blocks: 5,
            step_period_ms: 2000,
            grid_w: 20,
            grid_h: 20,
            snake_len: 3,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("error_rate", self.error_rate),
            ("familiarization_error_rate", self.familiarization_error_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        if self.step_period_ms == 0 {
            return Err(invalid("step_period_ms must be positive"));
        }
        if self.trials_per_block == 0 || self.n_blocks == 0 {
            return Err(invalid("need at least one main block with one trial"));
        }
        if self.grid_w < MIN_GRID || self.grid_h < MIN_GRID {
            return Err(invalid(format!("grid smaller than {MIN_GRID}x{MIN_GRID}")));
        }
        Ok(())
    }

    pub fn error_rate_for(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Familiarization => self.familiarization_error_rate,
            Phase::Main => self.error_rate,
        }
    }

    /// `(phase, block, decision trials)` in session order; the
    /// familiarization block is block 0.
    fn schedule(&self) -> Vec<(Phase, u32, usize)> {
        let fam = (self.familiarization_trials > 0).then_some((Phase::Familiarization, 0, self.familiarization_trials));
        fam.into_iter()
            .chain((1..=self.n_blocks).map(|b| (Phase::Main, b, self.trials_per_block)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Stopped,
    Disconnected,
    Collision,
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Trial(TrialEvent),
    Agent(AgentDiagnostics),
    Break {
        block: u32,
        next_trial: u32,
    },
    SessionEnd {
        reason: EndReason,
        n_trials: u32,
        timestamp_ms: u64,
    },
}

/// Contents of `session.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub format_version: u32,
    pub config: ProtocolConfig,
    pub seed: u64,
    pub participant: String,
    pub source: String,
}

impl SessionHeader {
    pub fn new(config: &ProtocolConfig, participant: &str, source: &str) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            seed: config.seed,
            participant: participant.into(),
            source: source.into(),
        }
    }
}

/// Step-by-step protocol runner around one engine: blocks, breaks and the
/// event log. Both the batch runner and the interactive service drive it.
#[derive(Debug, Clone)]
pub struct ProtocolSession {
    cfg: ProtocolConfig,
    engine: Engine,
    schedule: Vec<(Phase, u32, usize)>,
    block_pos: usize,
    done_in_block: usize,
    at_break: bool,
    ended: Option<EndReason>,
    records: Vec<LogRecord>,
}

impl ProtocolSession {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let mut engine = Engine::new(cfg.grid_w, cfg.grid_h, cfg.snake_len, cfg.step_period_ms, cfg.seed)?;
        let schedule = cfg.schedule();
        engine.set_phase(schedule[0].0, schedule[0].1);
        Ok(Self {
            cfg: cfg.clone(),
            engine,
            schedule,
            block_pos: 0,
            done_in_block: 0,
            at_break: false,
            ended: None,
            records: Vec::new(),
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn state(&self) -> &GameState {
        self.engine.state()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn ended(&self) -> Option<EndReason> {
        self.ended
    }

    /// Block just completed while waiting for a continue/stop choice.
    pub fn at_break(&self) -> Option<u32> {
        self.at_break.then(|| self.schedule[self.block_pos].1)
    }

    pub fn awaiting_command(&self) -> bool {
        self.ended.is_none() && !self.at_break && self.state().at_decision()
    }

    pub fn push_record(&mut self, record: LogRecord) {
        self.records.push(record);
    }

    fn rate(&self) -> f64 {
        self.cfg.error_rate_for(self.schedule[self.block_pos].0)
    }

    fn check_open(&self) -> Result<()> {
        if self.ended.is_some() {
            return Err(invalid("session has ended"));
        }
        if self.at_break {
            return Err(invalid("session is at a break"));
        }
        Ok(())
    }

    fn record_step(&mut self, event: &TrialEvent) {
        self.records.push(LogRecord::Trial(event.clone()));
        if !self.state().alive {
            self.end(EndReason::Collision);
        }
    }

    /// Closes the current block once its quota is reached.
    fn settle(&mut self) {
        if self.ended.is_some() || self.at_break {
            return;
        }
        if self.done_in_block == self.schedule[self.block_pos].2 {
            self.records.push(LogRecord::Break {
                block: self.schedule[self.block_pos].1,
                next_trial: self.state().trial_counter,
            });
            if self.block_pos + 1 == self.schedule.len() {
                self.end(EndReason::Completed);
            } else {
                self.at_break = true;
            }
        }
    }

    /// Applies a command at a decision point.
    pub fn command(&mut self, turn: Turn) -> Result<TrialEvent> {
        self.check_open()?;
        if !self.state().at_decision() {
            return Err(invalid("no decision pending"));
        }
        let event = self.engine.step(Some(turn), self.rate())?;
        self.done_in_block += 1;
        self.record_step(&event);
        Ok(event)
    }

    /// Runs auto-forward steps until a command is needed, a break is
    /// reached or the session ends.
    pub fn advance_to_decision(&mut self) -> Result<Vec<TrialEvent>> {
        self.settle();
        let mut events = Vec::new();
        while self.ended.is_none() && !self.at_break && !self.state().at_decision() {
            events.push(self.step_auto()?);
        }
        Ok(events)
    }

    /// One auto-forward step.
    pub fn step_auto(&mut self) -> Result<TrialEvent> {
        self.check_open()?;
        if self.state().at_decision() {
            return Err(invalid("a command is pending"));
        }
        let event = self.engine.step(None, self.rate())?;
        self.record_step(&event);
        Ok(event)
    }

    /// Leaves a break, starting the next block or ending the session.
    pub fn resume(&mut self, go_on: bool) -> Result<()> {
        self.settle();
        if !self.at_break {
            return Err(invalid("not at a break"));
        }
        self.at_break = false;
        if go_on {
            self.block_pos += 1;
            self.done_in_block = 0;
            let (phase, block, _) = self.schedule[self.block_pos];
            self.engine.set_phase(phase, block);
        } else {
            self.end(EndReason::Stopped);
        }
        Ok(())
    }

    pub fn end(&mut self, reason: EndReason) {
        if self.ended.is_some() {
            return;
        }
        self.ended = Some(reason);
        self.records.push(LogRecord::SessionEnd {
            reason,
            n_trials: self.state().trial_counter,
            timestamp_ms: self.state().step_counter * self.cfg.step_period_ms,
        });
    }

    pub fn into_log(self, participant: &str, source: &str) -> SessionLog {
        SessionLog {
            header: SessionHeader::new(&self.cfg, participant, source),
            final_state: self.engine.state().clone(),
            records: self.records,
        }
    }
}

/// Supplies commands at decision points.
pub trait CommandSource {
    fn name(&self) -> &str;
    /// `None` means the source disconnected.
    fn command(&mut self, state: &GameState, expected: Turn) -> Result<Option<Turn>>;
    /// Sees every decision outcome; may return an extra log record.
    fn observe(&mut self, _event: &TrialEvent) -> Result<Option<LogRecord>> {
        Ok(None)
    }
    /// Asked after each completed block except the last.
    fn continue_after_block(&mut self, _block: u32) -> bool {
        true
    }
}

/// Always issues the expected turn; optionally stops after a given block.
#[derive(Debug, Clone, Default)]
pub struct PerfectFollower {
    pub stop_after_block: Option<u32>,
}

impl CommandSource for PerfectFollower {
    fn name(&self) -> &str {
        "scripted"
    }

    fn command(&mut self, _state: &GameState, expected: Turn) -> Result<Option<Turn>> {
        Ok(Some(expected))
    }

    fn continue_after_block(&mut self, block: u32) -> bool {
        self.stop_after_block != Some(block)
    }
}

/// Plays back a fixed command list, then disconnects.
#[derive(Debug, Clone)]
pub struct ScriptedCommands {
    commands: std::vec::IntoIter<Turn>,
}

impl ScriptedCommands {
    pub fn new(commands: Vec<Turn>) -> Self {
        Self {
            commands: commands.into_iter(),
        }
    }
}

impl CommandSource for ScriptedCommands {
    fn name(&self) -> &str {
        "scripted"
    }

    fn command(&mut self, _state: &GameState, _expected: Turn) -> Result<Option<Turn>> {
        Ok(self.commands.next())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub records: Vec<LogRecord>,
    pub final_state: GameState,
}

impl SessionLog {
    pub fn trial_events(&self) -> impl Iterator<Item = &TrialEvent> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Trial(e) => Some(e),
            _ => None,
        })
    }
}

/// Familiarization block, then the main blocks, with the source deciding at
/// each break whether to continue.
pub fn run_session<S: CommandSource + ?Sized>(cfg: &ProtocolConfig, source: &mut S) -> Result<SessionLog> {
    let mut session = ProtocolSession::new(cfg)?;
    loop {
        session.advance_to_decision()?;
        if session.ended().is_some() {
            break;
        }
        if let Some(block) = session.at_break() {
            let go_on = source.continue_after_block(block);
            session.resume(go_on)?;
            continue;
        }
        let expected = session.state().expected_turn().expect("awaiting a command");
        match source.command(session.state(), expected)? {
            None => session.end(EndReason::Disconnected),
            Some(turn) => {
                let event = session.command(turn)?;
                if let Some(extra) = source.observe(&event)? {
                    session.push_record(extra);
                }
            }
        }
    }
    let name = source.name().to_string();
    Ok(session.into_log("anonymous", &name))
}

/// Writes `session.json` and `events.jsonl` into `dir`.
pub fn save_session(dir: &Path, header: &SessionHeader, records: &[LogRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("session.json"), header)?;
    write_jsonl(&dir.join("events.jsonl"), records)
}

pub fn load_events(path: &Path) -> Result<Vec<LogRecord>> {
    read_jsonl(path)
}

/// Re-runs the logged commands through a fresh engine, checking that every
/// regenerated trial event matches the log. Returns the state after each
/// trial event.
pub fn replay_events(cfg: &ProtocolConfig, records: &[LogRecord]) -> Result<Vec<GameState>> {
    cfg.validate()?;
    let mut engine = Engine::new(cfg.grid_w, cfg.grid_h, cfg.snake_len, cfg.step_period_ms, cfg.seed)?;
    let mut states = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let LogRecord::Trial(logged) = record else {
            continue;
        };
        engine.set_phase(logged.phase, logged.block);
        let event = engine.step(logged.issued_command, cfg.error_rate_for(logged.phase))?;
        if event != *logged {
            return Err(invalid(format!("replay diverged at record {i}")));
        }
        states.push(engine.state().clone());
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decisions(log: &SessionLog, phase: Phase) -> Vec<&TrialEvent> {
        log.trial_events().filter(|e| !e.auto_forward && e.phase == phase).collect()
    }

    #[test]
    fn five_blocks_of_120() {
        let log = run_session(&ProtocolConfig::default(), &mut PerfectFollower::default()).unwrap();
        assert_eq!(decisions(&log, Phase::Main).len(), 600);
        assert_eq!(decisions(&log, Phase::Familiarization).len(), 20);
        assert!(log.trial_events().any(|e| e.auto_forward));
        assert!(matches!(
            log.records.last(),
            Some(LogRecord::SessionEnd {
                reason: EndReason::Completed,
                ..
            })
        ));
    }

    #[test]
    fn familiarization_has_no_injections() {
        let cfg = ProtocolConfig {
            error_rate: 1.0,
            familiarization_trials: 50,
            n_blocks: 1,
            ..Default::default()
        };
        let log = run_session(&cfg, &mut PerfectFollower::default()).unwrap();
        assert!(decisions(&log, Phase::Familiarization).iter().all(|e| !e.error_injected));
        assert!(decisions(&log, Phase::Main).iter().all(|e| e.error_injected));
    }

    #[test]
    fn early_stop_ends_at_block_boundary() {
        let mut source = PerfectFollower {
            stop_after_block: Some(2),
        };
        let log = run_session(&ProtocolConfig::default(), &mut source).unwrap();
        let n = log.records.len();
        assert!(matches!(log.records[n - 2], LogRecord::Break { block: 2, .. }));
        assert!(matches!(
            log.records[n - 1],
            LogRecord::SessionEnd {
                reason: EndReason::Stopped,
                n_trials: 260,
                ..
            }
        ));
    }

    #[test]
    fn disconnect_preserves_log() {
        let mut source = ScriptedCommands::new(vec![Turn::Left; 5]);
        let log = run_session(&ProtocolConfig::default(), &mut source).unwrap();
        assert!(matches!(
            log.records.last(),
            Some(LogRecord::SessionEnd {
                reason: EndReason::Disconnected,
                ..
            })
        ));
        assert!(log.trial_events().filter(|e| !e.auto_forward).count() <= 5);
    }

    #[test]
    fn replay_reproduces_states() {
        let cfg = ProtocolConfig {
            seed: 17,
            ..Default::default()
        };
        let mut session = ProtocolSession::new(&cfg).unwrap();
        let mut states = Vec::new();
        while states.len() < 1000 {
            if session.at_break().is_some() || session.done_in_block == session.schedule[session.block_pos].2 {
                session.resume(true).unwrap();
                continue;
            }
            if !session.state().at_decision() {
                session.step_auto().unwrap();
                states.push(session.state().clone());
                continue;
            }
            let expected = session.state().expected_turn().unwrap();
            let turn = if session.state().trial_counter % 7 == 3 { expected.opposite() } else { expected };
            session.command(turn).unwrap();
            states.push(session.state().clone());
        }
        let replayed = replay_events(&cfg, session.records()).unwrap();
        assert_eq!(replayed, states);
    }

    #[test]
    fn tampered_log_diverges() {
        let cfg = ProtocolConfig::default();
        let log = run_session(&cfg, &mut PerfectFollower::default()).unwrap();
        let mut records = log.records.clone();
        let idx = records
            .iter()
            .position(|r| matches!(r, LogRecord::Trial(e) if !e.auto_forward))
            .unwrap();
        if let LogRecord::Trial(e) = &mut records[idx] {
            e.error_injected = !e.error_injected;
        }
        assert!(replay_events(&cfg, &records).is_err());
    }

    #[test]
    fn log_round_trips_with_type_tags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ProtocolConfig {
            n_blocks: 1,
            trials_per_block: 10,
            ..Default::default()
        };
        let log = run_session(&cfg, &mut PerfectFollower::default()).unwrap();
        save_session(dir.path(), &log.header, &log.records).unwrap();
        assert_eq!(load_events(&dir.path().join("events.jsonl")).unwrap(), log.records);
        let first = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
        let v: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
        assert_eq!(v["type"], "trial");
        for key in [
            "timestamp_ms",
            "trial_index",
            "expected_direction",
            "issued_command",
            "executed_direction",
            "error_injected",
            "auto_forward",
            "phase",
            "block",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ProtocolConfig {
                error_rate: 1.5,
                ..Default::default()
            },
            ProtocolConfig {
                step_period_ms: 0,
                ..Default::default()
            },
            ProtocolConfig {
                grid_w: 5,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(ProtocolSession::new(&cfg).is_err());
        }
    }
}
