use anyhow::{Context, Result};
use errp_bandit::archive::{load_trial_archive, save_trial_archive};
use errp_bandit::features::{save_feature_set, FeatureConfig, FeatureSet};
use errp_bandit::synth::{generate_errp_study, generate_subject, SynthConfig};
use serde::Serialize;

use crate::args::{FeatureProfile, FeaturesArgs, SynthArgs};
use crate::output::{load_json, resolve_seed, write_snapshot};
use crate::usage;

#[derive(Serialize)]
struct SynthResolved<'a> {
    synth: &'a SynthConfig,
    errp_study: Option<(usize, usize)>,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = &args.subject {
        cfg.subject_id = v.clone();
    }
    if let Some(v) = args.n_trials {
        cfg.n_trials = v;
    }
    if let Some(v) = args.sessions {
        cfg.n_sessions = v;
    }
    if let Some(v) = args.separability {
        cfg.separability = v;
    }
    if let Some(v) = args.errp_rate {
        cfg.errp_rate = v;
    }
    if let Some(v) = args.errp_snr {
        cfg.errp_snr = v;
    }
    cfg.seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let dataset = match args.errp_study {
        Some((n_err, n_corr)) => generate_errp_study(&cfg, n_err, n_corr)?,
        None => generate_subject(&cfg)?,
    };
    save_trial_archive(&dataset, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let resolved = SynthResolved {
        synth: &cfg,
        errp_study: args.errp_study,
    };
    write_snapshot(&args.out, "synth", &args, &resolved)?;
    eprintln!("wrote {} trials to {}", dataset.len(), args.out.display());
    Ok(())
}

pub fn features(args: FeaturesArgs) -> Result<()> {
    let dataset = load_trial_archive(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let cfg = match (&args.config, args.profile) {
        (Some(path), _) => load_json(path)?,
        (None, Some(FeatureProfile::InHouse)) => FeatureConfig::in_house(),
        (None, Some(FeatureProfile::Competition)) => FeatureConfig::competition(),
        (None, None) => FeatureConfig::for_provenance(dataset.provenance),
    };
    let set = FeatureSet::from_dataset(&dataset, &cfg)?;
    save_feature_set(&set, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    write_snapshot(&args.out, "features", &args, &cfg)?;
    eprintln!("wrote {} vectors of dimension {} to {}", set.len(), set.dim(), args.out.display());
    Ok(())
}
