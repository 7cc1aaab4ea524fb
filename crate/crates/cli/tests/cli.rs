use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_errp-bandit"));
    cmd.env_remove("ERRP_BANDIT_SEED");
    cmd
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

/// Runs every batch subcommand in `dir` using relative paths.
fn pipeline(dir: &Path) -> Vec<Vec<u8>> {
    let mut stdout = Vec::new();
    for s in 0..5 {
        let subject = format!("S{s}");
        let data = format!("data/{subject}");
        let feats = format!("features/{subject}");
        let seed = (10 + s).to_string();
        ok(dir, &["synth", "--out", &data, "--subject", &subject, "--n-trials", "40", "--sessions", "2", "--seed", &seed]);
        ok(dir, &["features", "--data", &data, "--out", &feats]);
        ok(dir, &["simulate", "--features", &feats, "--out", &format!("runs/linucb/{subject}"), "--split", "session:1/2", "--seed", "3", "--n-seeds", "2"]);
        ok(dir, &["simulate", "--features", &feats, "--out", &format!("runs/neural/{subject}"), "--agent", "neuralucb", "--split", "session:1/2", "--seed", "3"]);
    }
    ok(dir, &["hpo", "--features", "features/S0", "--out", "hpo", "--grid", "paper", "--n-seeds", "1", "--split", "shuffled:0.75:1"]);
    ok(dir, &["synth", "--out", "errp", "--errp-study", "30,30", "--seed", "4"]);
    ok(dir, &["analyze", "--data", "errp", "--out", "erp", "--kind", "erp", "--n-perm", "40"]);
    ok(dir, &["analyze", "--data", "data/S0", "--out", "ersp", "--kind", "ersp", "--n-perm", "20"]);
    ok(dir, &["game-sim", "--out", "game", "--familiarization-trials", "4", "--trials-per-block", "10", "--blocks", "2", "--seed", "8"]);
    ok(dir, &["game-sim", "--out", "game-agent", "--player", "agent", "--familiarization-trials", "2", "--trials-per-block", "6", "--blocks", "1"]);
    let runs: Vec<String> = (0..5).map(|s| format!("runs/linucb/S{s}")).collect();
    let against: Vec<String> = (0..5).map(|s| format!("runs/neural/S{s}")).collect();
    let mut half = vec!["stats", "--kind", "half-split", "--out", "half.json", "--runs"];
    half.extend(runs.iter().map(String::as_str));
    let half_out = run_in(dir, &half);
    // Tiny streams can produce all-zero differences, which is a data error.
    assert!(matches!(half_out.status.code(), Some(0) | Some(2)));
    let mut paired = vec!["stats", "--kind", "paired", "--runs"];
    paired.extend(runs.iter().map(String::as_str));
    paired.push("--against");
    paired.extend(against.iter().map(String::as_str));
    stdout.push(run_in(dir, &paired).stdout);
    fs::write(dir.join("p.txt"), "0.005\n0.01\n0.03\n0.04\n").unwrap();
    stdout.push(ok(dir, &["stats", "--kind", "fdr", "--p-values", "p.txt"]).stdout);
    stdout.push(ok(dir, &["replay", "--session", "game"]).stdout);
    stdout
}

#[test]
fn every_subcommand_is_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out_a = pipeline(a.path());
    let out_b = pipeline(b.path());
    assert_eq!(out_a, out_b);
    let (files_a, files_b) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(files_a.keys().collect::<Vec<_>>(), files_b.keys().collect::<Vec<_>>());
    for (name, bytes) in &files_a {
        assert!(bytes == &files_b[name], "{name} differs between runs");
    }

    let root = a.path();
    for run_dir in ["data/S0", "features/S0", "runs/linucb/S0", "hpo", "erp", "ersp", "game"] {
        let snap = read_json(&root.join(run_dir).join("config.json"));
        assert!(snap["command"].is_string() && snap["resolved"].is_object(), "{run_dir}");
    }
    assert!(root.join("runs/linucb/S0/seed-3/trials.jsonl").is_file());
    assert!(root.join("runs/linucb/S0/aggregate.json").is_file());
    assert!(root.join("runs/neural/S0/summary.json").is_file());

    let fdr: Value = serde_json::from_slice(&out_a[1]).unwrap();
    assert_eq!(fdr["reject"], serde_json::json!([true, true, true, true]));
    let replay: Value = serde_json::from_slice(&out_a[2]).unwrap();
    assert_eq!(replay["reproduced"], true);
}

#[test]
fn analysis_outputs_have_axes_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "errp", "--errp-study", "20,20", "--seed", "2"]);
    ok(d, &["analyze", "--data", "errp", "--out", "erp", "--kind", "erp", "--n-perm", "20"]);
    let side = read_json(&d.join("erp/erp.json"));
    let n_times = side["times_s"].as_array().unwrap().len();
    assert_eq!(n_times, 1500);
    assert_eq!(side["significant"].as_array().unwrap().len(), n_times);
    let csv = fs::read_to_string(d.join("erp/erp_difference.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), n_times + 1);
    assert_eq!(lines.count(), 8);
    assert!(fs::read_to_string(d.join("erp/erp.svg")).unwrap().starts_with("<svg"));

    ok(d, &["analyze", "--data", "errp", "--out", "ersp", "--kind", "ersp", "--n-perm", "10", "--channel", "C4"]);
    let side = read_json(&d.join("ersp/ersp.json"));
    assert_eq!(side["freqs_hz"].as_array().unwrap().len(), 28);
    assert_eq!(side["baseline_s"], serde_json::json!([-0.75, -0.5]));
    for f in ["ersp_left.csv", "ersp_right.csv", "ersp_mask.csv", "ersp_left.svg", "ersp_mask.svg"] {
        assert!(d.join("ersp").join(f).is_file(), "{f}");
    }
}

#[test]
fn hpo_default_grid_is_the_published_alpha_set() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "data", "--n-trials", "30", "--sessions", "2"]);
    ok(d, &["features", "--data", "data", "--out", "f"]);
    ok(d, &["hpo", "--features", "f", "--out", "h", "--agent", "linucb", "--grid", "paper", "--n-seeds", "1"]);
    let hpo = read_json(&d.join("h/hpo.json"));
    let alphas: Vec<f64> = hpo["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["agent"]["alpha"].as_f64().unwrap())
        .collect();
    assert_eq!(alphas, vec![0.01, 0.1, 1.0, 2.0, 4.0, 10.0]);
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| run_in(d, args).status.code();
    assert_eq!(code(&["simulate", "--features", "f", "--out", "o", "--alpha", "banana"]), Some(1));
    assert_eq!(code(&["simulate", "--bogus-flag"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&[]), Some(1));
    assert_eq!(code(&["simulate", "--features", "f", "--out", "o", "--split", "random"]), Some(1));
    assert_eq!(code(&["synth", "--out", "x", "--separability", "1.5"]), Some(1));
    assert_eq!(code(&["game-sim", "--out", "g", "--error-rate", "2"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));

    let missing = run_in(d, &["simulate", "--features", "missing", "--out", "o"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing"));
    fs::create_dir_all(d.join("broken")).unwrap();
    fs::write(d.join("broken/header.json"), "{not json").unwrap();
    assert_eq!(code(&["features", "--data", "broken", "--out", "o"]), Some(2));
    assert_eq!(code(&["replay", "--session", "nowhere"]), Some(2));
}

#[test]
fn usage_errors_print_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["simulate", "--features", "f", "--out", "o", "--alpha", "banana"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("banana") && err.contains("--alpha"), "{err}");
}

#[test]
fn seed_environment_variable_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = bin()
        .current_dir(d)
        .env("ERRP_BANDIT_SEED", "5")
        .args(["synth", "--out", "env", "--n-trials", "20", "--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    ok(d, &["synth", "--out", "flag", "--n-trials", "20", "--seed", "5"]);
    assert_eq!(read_json(&d.join("env/config.json"))["resolved"]["synth"]["seed"], 5);
    assert_eq!(fs::read(d.join("env/data.f32")).unwrap(), fs::read(d.join("flag/data.f32")).unwrap());

    let bad = bin()
        .current_dir(d)
        .env("ERRP_BANDIT_SEED", "not-a-number")
        .args(["synth", "--out", "x"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn game_sim_respects_the_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["game-sim", "--out", "g", "--trials-per-block", "2000", "--blocks", "5", "--seed", "1"]);
    let summary = read_json(&d.join("g/summary.json"));
    assert_eq!(summary["decisions"], 10_020);
    assert_eq!(summary["familiarization_injected"], 0);
    let frac = summary["injected_fraction"].as_f64().unwrap();
    assert!((0.045..=0.055).contains(&frac), "{frac}");
    assert_eq!(summary["end_reason"], "completed");

    ok(d, &["game-sim", "--out", "stop", "--trials-per-block", "5", "--stop-after-block", "1"]);
    let events = fs::read_to_string(d.join("stop/events.jsonl")).unwrap();
    let last: Value = serde_json::from_str(events.lines().last().unwrap()).unwrap();
    assert_eq!(last["type"], "session_end");
    assert_eq!(last["reason"], "stopped");
    assert_eq!(last["n_trials"], 25);

    let mut lines: Vec<String> = fs::read_to_string(d.join("g/events.jsonl")).unwrap().lines().map(String::from).collect();
    let i = lines.iter().position(|l| l.contains("\"auto_forward\":false")).unwrap();
    lines[i] = lines[i].replace("\"error_injected\":false", "\"error_injected\":true");
    fs::write(d.join("g/events.jsonl"), lines.join("\n")).unwrap();
    assert_eq!(run_in(d, &["replay", "--session", "g"]).status.code(), Some(2));
}
