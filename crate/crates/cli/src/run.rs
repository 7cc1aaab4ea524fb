use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use errp_bandit::agents::AgentSpec;
use errp_bandit::features::{load_feature_set, FeatureSet};
use errp_bandit::reward::ErrPDetectorModel;
use errp_bandit::sim::{
    aggregate_seeds, default_n_seeds, grid_search, half_split_compare_mean, half_split_errors, linucb_grid,
    load_run_result, neuralucb_grid, run_seeds, save_run_result, RunConfig, RunResult,
};
use errp_bandit::stats::{fdr_bh, wilcoxon_signed_rank, Alternative, TestResult};
use serde::Serialize;

use crate::args::{DetectorArgs, GridKind, HpoArgs, SimulateArgs, StatsArgs, StatsKind};
use crate::output::{emit_json, resolve_seed, save_json, write_snapshot};
use crate::usage;

pub fn detector(args: &DetectorArgs) -> Result<ErrPDetectorModel> {
    ErrPDetectorModel::new(args.tpr, args.fpr).map_err(|e| usage(e.to_string()))
}

fn load_features(dir: &Path) -> Result<FeatureSet> {
    load_feature_set(dir).with_context(|| format!("reading feature set {}", dir.display()))
}

fn check_agent(spec: &AgentSpec, dim: usize) -> Result<()> {
    spec.build(2, dim, 0).map(|_| ()).map_err(|e| usage(e.to_string()))
}

#[derive(Serialize)]
struct SimulateResolved<'a> {
    run: &'a RunConfig,
    seeds: &'a [u64],
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    if args.n_seeds == 0 {
        return Err(usage("--n-seeds must be positive"));
    }
    let features = load_features(&args.features)?;
    let agent = args.agent.spec();
    check_agent(&agent, features.dim())?;
    let seed = resolve_seed(args.seed, 0)?;
    let cfg = RunConfig {
        agent,
        detector: detector(&args.detector)?,
        split: args.split.clone(),
        seed,
        eval_learning: !args.freeze_eval,
        features: Some(features.config.clone()),
    };
    let seeds: Vec<u64> = (0..args.n_seeds as u64).map(|i| seed.wrapping_add(i)).collect();
    let results = run_seeds(&features, &cfg, &seeds)?;
    write_snapshot(&args.out, "simulate", &args, &SimulateResolved { run: &cfg, seeds: &seeds })?;
    if let [single] = results.as_slice() {
        save_run_result(single, &args.out)?;
    } else {
        for r in &results {
            save_run_result(r, &args.out.join(format!("seed-{}", r.seed)))?;
        }
        save_json(&args.out.join("aggregate.json"), &aggregate_seeds(&results)?)?;
    }
    let mean = results.iter().map(|r| r.accuracy).sum::<f64>() / results.len() as f64;
    eprintln!("{}: mean eval accuracy {mean:.4} over {} seed(s)", features.subject_id, results.len());
    Ok(())
}

pub fn hpo(args: HpoArgs) -> Result<()> {
    let features = load_features(&args.features)?;
    let spec = args.agent.spec();
    check_agent(&spec, features.dim())?;
    let grid = match (args.grid, &spec) {
        (GridKind::Published, AgentSpec::Linucb { .. }) => linucb_grid(),
        (GridKind::Published, AgentSpec::Neuralucb(_)) => neuralucb_grid(),
        (GridKind::Single, _) => vec![spec.clone()],
    };
    let n_seeds = args.n_seeds.unwrap_or_else(|| default_n_seeds(&spec));
    if n_seeds == 0 {
        return Err(usage("--n-seeds must be positive"));
    }
    let base = RunConfig {
        agent: spec,
        detector: detector(&args.detector)?,
        split: args.split.clone(),
        seed: resolve_seed(args.seed, 0)?,
        eval_learning: true,
        features: Some(features.config.clone()),
    };
    let result = grid_search(&features, &base, &grid, n_seeds, args.grid == GridKind::Published)?;
    write_snapshot(&args.out, "hpo", &args, &base)?;
    save_json(&args.out.join("hpo.json"), &result)?;
    eprintln!("best: {}", serde_json::to_string(&result.best.agent)?);
    Ok(())
}

/// A single run directory, or a multi-seed directory of `seed-*` runs.
pub fn load_runs(dir: &Path) -> Result<Vec<RunResult>> {
    if dir.join("summary.json").is_file() {
        return Ok(vec![load_run_result(dir)?]);
    }
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut seed_dirs: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("seed-"))
            .and_then(|s| s.parse::<u64>().ok());
        if let (Some(seed), true) = (seed, path.join("summary.json").is_file()) {
            seed_dirs.push((seed, path));
        }
    }
    if seed_dirs.is_empty() {
        bail!("no runs found in {}", dir.display());
    }
    seed_dirs.sort();
    seed_dirs.iter().map(|(_, p)| Ok(load_run_result(p)?)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Serialize)]
struct HalfSplitReport {
    kind: &'static str,
    subjects: Vec<String>,
    first_half_errors: Vec<f64>,
    second_half_errors: Vec<f64>,
    test: TestResult,
}

#[derive(Serialize)]
struct PairedReport {
    kind: &'static str,
    accuracy: Vec<f64>,
    accuracy_against: Vec<f64>,
    mean_accuracy: f64,
    mean_accuracy_against: f64,
    test: TestResult,
}

#[derive(Serialize)]
struct FdrReport {
    kind: &'static str,
    q: f64,
    p_values: Vec<f64>,
    reject: Vec<bool>,
    p_adjusted: Vec<f64>,
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let load_all = |dirs: &[PathBuf]| -> Result<Vec<Vec<RunResult>>> { dirs.iter().map(|d| load_runs(d)).collect() };
    match args.kind {
        StatsKind::HalfSplit => {
            if args.runs.is_empty() {
                return Err(usage("--runs needs one directory per subject"));
            }
            let runs = load_all(&args.runs)?;
            let halves = |pick: fn((u32, u32)) -> u32| -> Vec<f64> {
                runs.iter()
                    .map(|rs| mean(&rs.iter().map(|r| pick(half_split_errors(r)) as f64).collect::<Vec<_>>()))
                    .collect()
            };
            let report = HalfSplitReport {
                kind: "half-split",
                subjects: runs.iter().map(|rs| rs[0].subject_id.clone()).collect(),
                first_half_errors: halves(|h| h.0),
                second_half_errors: halves(|h| h.1),
                test: half_split_compare_mean(&runs)?,
            };
            emit_json(args.out.as_deref(), &report)
        }
        StatsKind::Paired => {
            if args.runs.is_empty() || args.runs.len() != args.against.len() {
                return Err(usage("--runs and --against need the same number of directories"));
            }
            let acc = |dirs: &[PathBuf]| -> Result<Vec<f64>> {
                Ok(load_all(dirs)?
                    .iter()
                    .map(|rs| mean(&rs.iter().map(|r| r.accuracy).collect::<Vec<_>>()))
                    .collect())
            };
            let (a, b) = (acc(&args.runs)?, acc(&args.against)?);
            let report = PairedReport {
                kind: "paired",
                mean_accuracy: mean(&a),
                mean_accuracy_against: mean(&b),
                test: wilcoxon_signed_rank(&a, &b, Alternative::TwoSided)?,
                accuracy: a,
                accuracy_against: b,
            };
            emit_json(args.out.as_deref(), &report)
        }
        StatsKind::Fdr => {
            let path = args.p_values.as_ref().ok_or_else(|| usage("--p-values is required for fdr"))?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let p: Vec<f64> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| l.parse::<f64>().with_context(|| format!("bad p-value '{l}'")))
                .collect::<Result<_>>()?;
            let r = fdr_bh(&p, args.q)?;
            emit_json(
                args.out.as_deref(),
                &FdrReport {
                    kind: "fdr",
                    q: args.q,
                    p_values: p,
                    reject: r.reject,
                    p_adjusted: r.p_adjusted,
                },
            )
        }
    }
}
