use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use errp_bandit::analysis::{
    baseline_corrected, compare_conditions_ersp, difference_wave, erp_average, erp_significance, ersp,
    prominent_extrema, Condition, ErspConfig, Extremum, ERP_BASELINE_S,
};
use errp_bandit::archive::load_trial_archive;
use errp_bandit::types::{Dataset, Matrix, Trial};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{AnalysisKind, AnalyzeArgs};
use crate::output::{resolve_seed, save_json, write_matrix_csv, write_snapshot};
use crate::plot::{heatmap, line_plot, Series};
use crate::usage;

/// Window searched for difference-wave peaks and the spacing between them.
const PEAK_WINDOW_S: (f64, f64) = (0.1, 0.5);
const PEAK_SEPARATION_S: f64 = 0.03;

#[derive(Serialize)]
struct AnalyzeResolved {
    kind: AnalysisKind,
    channel: String,
    n_perm: usize,
    q: f64,
    seed: u64,
    ersp: Option<ErspConfig>,
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    if args.n_perm == 0 {
        return Err(usage("--n-perm must be positive"));
    }
    if !(args.q > 0.0 && args.q <= 1.0) {
        return Err(usage("--q must lie in (0, 1]"));
    }
    let dataset = load_trial_archive(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let channel = args.channel.clone().unwrap_or_else(|| {
        match args.kind {
            AnalysisKind::Erp => "Cz",
            AnalysisKind::Ersp => "C3",
        }
        .to_string()
    });
    let ch = dataset
        .channel_index(&channel)
        .with_context(|| format!("channel {channel} not in the archive"))?;
    let resolved = AnalyzeResolved {
        kind: args.kind,
        channel: channel.clone(),
        n_perm: args.n_perm,
        q: args.q,
        seed: resolve_seed(args.seed, 0)?,
        ersp: (args.kind == AnalysisKind::Ersp).then(ErspConfig::default),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(resolved.seed);
    match args.kind {
        AnalysisKind::Erp => erp(&dataset, ch, &resolved, &args.out, &mut rng)?,
        AnalysisKind::Ersp => {
            let conditions = parse_conditions(&args.conditions)?;
            ersp_maps(&dataset, ch, conditions, &resolved, &args.out, &mut rng)?
        }
    }
    write_snapshot(&args.out, "analyze", &args, &resolved)
}

fn parse_conditions(names: &[String]) -> Result<[Condition; 2]> {
    let parsed: Vec<Condition> = names
        .iter()
        .map(|n| n.parse::<Condition>().map_err(|e| usage(e.to_string())))
        .collect::<Result<_>>()?;
    match parsed.as_slice() {
        [a, b] if a != b => Ok([*a, *b]),
        _ => Err(usage("--conditions takes two distinct conditions")),
    }
}

#[derive(Serialize)]
struct ErpSidecar<'a> {
    channel: &'a str,
    channels: &'a [String],
    times_s: &'a [f64],
    baseline_s: (f64, f64),
    n_error: usize,
    n_correct: usize,
    extrema: Vec<Extremum>,
    significant: Vec<bool>,
    p_adjusted: Vec<f64>,
}

fn erp(ds: &Dataset, ch: usize, cfg: &AnalyzeResolved, out: &Path, rng: &mut ChaCha8Rng) -> Result<()> {
    let trials = baseline_corrected(&ds.trials, ERP_BASELINE_S)?;
    let error = erp_average(&trials, Condition::Error)?;
    let correct = erp_average(&trials, Condition::Correct)?;
    let diff = difference_wave(&error, &correct)?;
    let sig = erp_significance(&trials, ch, cfg.n_perm, cfg.q, rng)?;
    for (name, wave) in [("error", &error), ("correct", &correct), ("difference", &diff)] {
        write_matrix_csv(&out.join(format!("erp_{name}.csv")), "channel", &ds.channel_names, &wave.times_s, &wave.values)?;
    }
    let sidecar = ErpSidecar {
        channel: &cfg.channel,
        channels: &ds.channel_names,
        times_s: &diff.times_s,
        baseline_s: ERP_BASELINE_S,
        n_error: error.n_trials,
        n_correct: correct.n_trials,
        extrema: prominent_extrema(diff.values.row(ch), &diff.times_s, PEAK_WINDOW_S, 3, PEAK_SEPARATION_S),
        significant: sig.reject.clone(),
        p_adjusted: sig.p_adjusted,
    };
    save_json(&out.join("erp.json"), &sidecar)?;
    let svg = line_plot(
        &format!("ERP at {} (shaded: FDR q={})", cfg.channel, cfg.q),
        &diff.times_s,
        &[
            Series { name: "error", values: error.values.row(ch), color: "#d62728" },
            Series { name: "correct", values: correct.values.row(ch), color: "#1f77b4" },
            Series { name: "difference", values: diff.values.row(ch), color: "#000000" },
        ],
        Some(&sig.reject),
        "time (s)",
        "amplitude (uV)",
    );
    fs::write(out.join("erp.svg"), svg)?;
    Ok(())
}

#[derive(Serialize)]
struct ErspSidecar<'a> {
    channel: &'a str,
    conditions: [&'a str; 2],
    n_trials: [usize; 2],
    freqs_hz: &'a [f64],
    times_s: &'a [f64],
    baseline_s: (f64, f64),
    cycles_param: (f64, f64),
    n_significant: usize,
}

fn ersp_maps(
    ds: &Dataset,
    ch: usize,
    conditions: [Condition; 2],
    cfg: &AnalyzeResolved,
    out: &Path,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let ersp_cfg = cfg.ersp.clone().unwrap_or_default();
    let select = |c: Condition| -> Vec<Trial> { ds.trials.iter().filter(|t| c.matches(t)).cloned().collect() };
    let (a, b) = (select(conditions[0]), select(conditions[1]));
    let maps = [ersp(&a, ch, &ersp_cfg)?, ersp(&b, ch, &ersp_cfg)?];
    let cmp = compare_conditions_ersp(&a, &b, ch, &ersp_cfg, cfg.n_perm, cfg.q, rng)?;
    let freq_labels: Vec<String> = maps[0].freqs_hz.iter().map(|f| format!("{f}")).collect();
    for (cond, map) in conditions.iter().zip(&maps) {
        let tag = cond.tag();
        write_matrix_csv(&out.join(format!("ersp_{tag}.csv")), "freq_hz", &freq_labels, &map.times_s, &map.db)?;
        let svg = heatmap(
            &format!("ERSP {tag} at {}", cfg.channel),
            &map.times_s,
            &map.freqs_hz,
            &map.db,
            "time (s)",
            "frequency (Hz)",
            "dB",
        );
        fs::write(out.join(format!("ersp_{tag}.svg")), svg)?;
    }
    let mask = Matrix::from_vec(
        cmp.freqs_hz.len(),
        cmp.times_s.len(),
        cmp.mask.iter().map(|m| *m as u8 as f64).collect(),
    )?;
    write_matrix_csv(&out.join("ersp_mask.csv"), "freq_hz", &freq_labels, &cmp.times_s, &mask)?;
    let contrast = Matrix::from_vec(
        mask.rows(),
        mask.cols(),
        maps[0]
            .db
            .data()
            .iter()
            .zip(maps[1].db.data())
            .zip(&cmp.mask)
            .map(|((x, y), m)| if *m { x - y } else { 0.0 })
            .collect(),
    )?;
    let svg = heatmap(
        &format!("{} - {} where significant (FDR q={})", conditions[0].tag(), conditions[1].tag(), cfg.q),
        &cmp.times_s,
        &cmp.freqs_hz,
        &contrast,
        "time (s)",
        "frequency (Hz)",
        "dB",
    );
    fs::write(out.join("ersp_mask.svg"), svg)?;
    let sidecar = ErspSidecar {
        channel: &cfg.channel,
        conditions: [conditions[0].tag(), conditions[1].tag()],
        n_trials: [a.len(), b.len()],
        freqs_hz: &cmp.freqs_hz,
        times_s: &cmp.times_s,
        baseline_s: ersp_cfg.baseline_s,
        cycles_param: ersp_cfg.cycles_param,
        n_significant: cmp.mask.iter().filter(|m| **m).count(),
    };
    save_json(&out.join("ersp.json"), &sidecar)
}
