use errp_bandit::game::{replay_events, Engine, Heading, LogRecord, Move, PathPlanner, Phase, ProtocolConfig, Turn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Steps an engine for `n` cells, issuing a random command at each decision
/// (the intended turn with probability `follow`).
fn drive(engine: &mut Engine, n: usize, error_rate: f64, follow: f64, seed: u64) -> Vec<LogRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let command = engine.state().expected_turn().map(|t| if rng.gen::<f64>() < follow { t } else { t.opposite() });
        records.push(LogRecord::Trial(engine.step(command, error_rate).unwrap()));
    }
    records
}

fn main_engine(seed: u64) -> Engine {
    let mut engine = Engine::new(20, 20, 3, 2000, seed).unwrap();
    engine.set_phase(Phase::Main, 1);
    engine
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn executed_moves_follow_injection(seed in any::<u64>(), rate in 0.0f64..=1.0, follow in 0.0f64..=1.0) {
        let mut engine = main_engine(seed);
        let mut last_trial = None;
        let mut last_time = None;
        for record in drive(&mut engine, 400, rate, follow, seed ^ 1) {
            let LogRecord::Trial(e) = record else { unreachable!() };
            if let Some(t) = last_time {
                prop_assert!(e.timestamp_ms > t);
            }
            last_time = Some(e.timestamp_ms);
            if e.auto_forward {
                prop_assert_eq!(e.executed_direction, Move::Forward);
                prop_assert!(!e.error_injected && e.issued_command.is_none());
                continue;
            }
            let issued = e.issued_command.unwrap();
            let expected = e.expected_direction.turn().unwrap();
            let want = if e.error_injected { expected.opposite() } else { issued };
            prop_assert_eq!(e.executed_direction, Move::from(want));
            if let Some(prev) = last_trial {
                prop_assert!(e.trial_index > prev);
            }
            last_trial = Some(e.trial_index);
        }
    }

    #[test]
    fn replay_tracks_the_engine_for_1000_steps(seed in any::<u64>(), follow in 0.5f64..=1.0) {
        let cfg = ProtocolConfig { seed, error_rate: 0.2, ..ProtocolConfig::default() };
        let mut engine = main_engine(seed);
        let mut states = Vec::new();
        let mut records = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(!seed);
        for _ in 0..1000 {
            let command = engine.state().expected_turn().map(|t| if rng.gen::<f64>() < follow { t } else { t.opposite() });
            records.push(LogRecord::Trial(engine.step(command, cfg.error_rate).unwrap()));
            states.push(engine.state().clone());
        }
        prop_assert_eq!(replay_events(&cfg, &records).unwrap(), states);
    }
}

#[test]
fn turn_directions_stay_balanced() {
    for seed in 0..5 {
        let mut planner = PathPlanner::new(20, 20, seed).unwrap();
        let (mut head, mut heading) = ([10, 10], Heading::North);
        while planner.turn_counts().0 + planner.turn_counts().1 < 1000 {
            let path = planner.plan(head, heading, &[]).unwrap();
            for turn in &path.turns {
                heading = heading.turned(*turn);
            }
            head = path.fruit;
        }
        let (left, right) = planner.turn_counts();
        let frac = left as f64 / (left + right) as f64;
        assert!((0.4..=0.6).contains(&frac), "seed {seed}: left fraction {frac}");
    }
}

#[test]
fn injection_rate_matches_configuration() {
    let rate = 0.05;
    let mut engine = main_engine(77);
    let (mut decisions, mut injected) = (0u32, 0u32);
    while decisions < 10_000 {
        let e = engine.step(engine.state().expected_turn(), rate).unwrap();
        if !e.auto_forward {
            decisions += 1;
            injected += e.error_injected as u32;
        }
    }
    let observed = injected as f64 / decisions as f64;
    let band = 3.0 * (rate * (1.0 - rate) / decisions as f64).sqrt();
    assert!((observed - rate).abs() <= band, "observed {observed}");
}

#[test]
fn turn_labels_roundtrip() {
    for t in [Turn::Left, Turn::Right] {
        assert_eq!(Turn::from_label(t.label()), t);
        assert_eq!(t.opposite().opposite(), t);
    }
}
