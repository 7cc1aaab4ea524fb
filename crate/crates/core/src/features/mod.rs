//! Motor-imagery context features: Morlet power in the mu and beta bands,
//! resized to a fixed 15x32 grid per band and flattened.

mod cwt;
mod resize;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use cwt::{band_power, freq_grid, morlet_cwt, morlet_wavelet, MorletBank, TfMap, DEFAULT_SUPPORT_SIGMAS};
pub use resize::{cubic_kernel, resize_bicubic, CUBIC_A};

use crate::archive::{read_f32, read_json, write_f32, write_json, LabelRecord};
use crate::error::{invalid, io_err, Error, Result};
use crate::types::{Dataset, Label, Provenance, Trial};

pub const GRID_ROWS: usize = 15;
pub const GRID_COLS: usize = 32;
pub const N_BANDS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub channels: Vec<String>,
    pub mu_hz: (f64, f64),
    pub beta_hz: (f64, f64),
    /// Sub-epoch start relative to the onset marker.
    pub epoch_offset_s: f64,
    pub epoch_len_s: f64,
    pub freq_step_hz: f64,
    /// `n_cycles(f) = cycles_per_hz * f`.
    pub cycles_per_hz: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self::in_house()
    }
}

impl FeatureConfig {
    /// 0.5 s after the cue, as used for cue-based competition recordings.
    pub fn competition() -> Self {
        Self {
            channels: vec!["C3".into(), "Cz".into(), "C4".into()],
            mu_hz: (6.0, 13.0),
            beta_hz: (17.0, 30.0),
            epoch_offset_s: 0.5,
            epoch_len_s: 2.0,
            freq_step_hz: 1.0,
            cycles_per_hz: 0.5,
        }
    }

    /// Starts at onset: a 0.5 s offset would run past a [-1, 2] s window.
    pub fn in_house() -> Self {
        Self {
            epoch_offset_s: 0.0,
            ..Self::competition()
        }
    }

    pub fn for_provenance(p: Provenance) -> Self {
        match p {
            Provenance::CompetitionLike => Self::competition(),
            Provenance::InHouseLike | Provenance::Synthetic => Self::in_house(),
        }
    }

    pub fn dim(&self) -> usize {
        self.channels.len() * N_BANDS * GRID_ROWS * GRID_COLS
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.channels.len(), N_BANDS, GRID_ROWS, GRID_COLS]
    }

    fn validate(&self, fs_hz: f64) -> Result<()> {
        let nyquist = fs_hz / 2.0;
        for (lo, hi) in [self.mu_hz, self.beta_hz] {
            if !(lo > 0.0 && lo <= hi && hi < nyquist) {
                return Err(invalid(format!("band ({lo}, {hi}) Hz outside (0, {nyquist})")));
            }
        }
        if self.channels.is_empty() {
            return Err(invalid("no feature channels"));
        }
        if !(self.freq_step_hz > 0.0 && self.cycles_per_hz > 0.0 && self.epoch_len_s > 0.0) {
            return Err(invalid("frequency step, cycle rule and epoch length must be positive"));
        }
        Ok(())
    }
}

/// Flattened context vector, laid out channel-major, then mu before beta,
/// then row-major 15x32.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub shape: [usize; 4],
    pub subject_id: String,
    pub trial_index: u32,
    /// Bookkeeping only; agents never see it.
    pub label: Label,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Reusable extractor: caches the wavelet bank for one sampling rate and
/// sub-epoch length.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    fs_hz: f64,
    n_mu: usize,
    bank: MorletBank,
    epoch_len: usize,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig, fs_hz: f64) -> Result<Self> {
        cfg.validate(fs_hz)?;
        let mu = freq_grid(cfg.mu_hz.0, cfg.mu_hz.1, cfg.freq_step_hz);
        let beta = freq_grid(cfg.beta_hz.0, cfg.beta_hz.1, cfg.freq_step_hz);
        let freqs: Vec<f64> = mu.iter().chain(&beta).copied().collect();
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("mu and beta bands overlap"));
        }
        let cycles: Vec<f64> = freqs.iter().map(|f| f * cfg.cycles_per_hz).collect();
        let epoch_len = (cfg.epoch_len_s * fs_hz).round() as usize;
        let bank = MorletBank::new(fs_hz, &freqs, &cycles, epoch_len, DEFAULT_SUPPORT_SIGMAS)?;
        Ok(Self {
            n_mu: mu.len(),
            cfg,
            fs_hz,
            bank,
            epoch_len,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    /// Concatenated resized band-power blocks before normalization.
    pub fn raw_features(&self, trial: &Trial, channel_names: &[String]) -> Result<Vec<f64>> {
        if trial.fs_hz != self.fs_hz {
            return Err(invalid(format!(
                "extractor built for {} Hz, trial sampled at {} Hz",
                self.fs_hz, trial.fs_hz
            )));
        }
        let start = trial.sample_at(self.cfg.epoch_offset_s);
        let end = start + self.epoch_len as isize;
        if start < 0 || end > trial.n_samples() as isize {
            return Err(Error::EpochOutsideWindow);
        }
        let (start, end) = (start as usize, end as usize);
        let mut out = Vec::with_capacity(self.dim());
        for name in &self.cfg.channels {
            let ch = channel_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::MissingChannel(name.clone()))?;
            let power = self.bank.power(&trial.data.row(ch)[start..end])?;
            let n_freqs = power.rows();
            for (lo, hi) in [(0, self.n_mu), (self.n_mu, n_freqs)] {
                let block = resize_bicubic(&power.slice_rows(lo, hi), GRID_ROWS, GRID_COLS)?;
                out.extend_from_slice(block.data());
            }
        }
        Ok(out)
    }

    pub fn extract(&self, trial: &Trial, channel_names: &[String]) -> Result<FeatureVector> {
        let mut values = self.raw_features(trial, channel_names)?;
        zscore(&mut values);
        crate::types::check_finite(&values, "feature vector")?;
        Ok(FeatureVector {
            values,
            shape: self.cfg.shape(),
            subject_id: trial.subject_id.clone(),
            trial_index: trial.trial_index,
            label: trial.label,
        })
    }
}

/// Subtract the mean and divide by the population standard deviation.
/// A constant vector maps to all zeros.
pub fn zscore(values: &mut [f64]) {
    let n = values.len() as f64;
    if n == 0.0 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > f64::MIN_POSITIVE {
        values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}

pub fn extract_features(trial: &Trial, channel_names: &[String], cfg: &FeatureConfig) -> Result<FeatureVector> {
    FeatureExtractor::new(cfg.clone(), trial.fs_hz)?.extract(trial, channel_names)
}

/// Feature vectors for a whole subject, aligned with their trial metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub subject_id: String,
    pub config: FeatureConfig,
    pub vectors: Vec<FeatureVector>,
    pub records: Vec<LabelRecord>,
}

impl FeatureSet {
    pub fn from_dataset(dataset: &Dataset, cfg: &FeatureConfig) -> Result<Self> {
        let extractor = FeatureExtractor::new(cfg.clone(), dataset.fs_hz)?;
        let vectors = dataset
            .trials
            .iter()
            .map(|t| extractor.extract(t, &dataset.channel_names))
            .collect::<Result<Vec<_>>>()?;
        let records = dataset
            .trials
            .iter()
            .map(|t| LabelRecord {
                label: t.label,
                errp_injected: t.errp_injected,
                session_id: t.session_id,
                trial_index: t.trial_index,
            })
            .collect();
        Ok(Self {
            subject_id: dataset.subject_id.clone(),
            config: cfg.clone(),
            vectors,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn sessions(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.session_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureHeader {
    n_trials: usize,
    dim: usize,
    shape: [usize; 4],
    config: FeatureConfig,
    subject_id: String,
}

pub fn save_feature_set(set: &FeatureSet, dir: &Path) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyArchive);
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let header = FeatureHeader {
        n_trials: set.len(),
        dim: set.dim(),
        shape: set.config.shape(),
        config: set.config.clone(),
        subject_id: set.subject_id.clone(),
    };
    write_json(&dir.join("header.json"), &header)?;
    write_json(&dir.join("labels.json"), &set.records)?;
    write_f32(
        &dir.join("data.f32"),
        set.vectors.iter().flat_map(|v| v.values.iter().copied()),
    )
}

pub fn load_feature_set(dir: &Path) -> Result<FeatureSet> {
    let header: FeatureHeader = read_json(&dir.join("header.json"))?;
    if header.n_trials == 0 {
        return Err(Error::EmptyArchive);
    }
    if header.dim != header.config.dim() || header.shape != header.config.shape() {
        return Err(invalid("feature header shape disagrees with its config"));
    }
    let records: Vec<LabelRecord> = read_json(&dir.join("labels.json"))?;
    if records.len() != header.n_trials {
        return Err(invalid("labels.json length differs from n_trials"));
    }
    let values = read_f32(&dir.join("data.f32"), header.n_trials * header.dim)?;
    let vectors = values
        .chunks_exact(header.dim)
        .zip(&records)
        .map(|(chunk, rec)| FeatureVector {
            values: chunk.to_vec(),
            shape: header.shape,
            subject_id: header.subject_id.clone(),
            trial_index: rec.trial_index,
            label: rec.label,
        })
        .collect();
    Ok(FeatureSet {
        subject_id: header.subject_id,
        config: header.config,
        vectors,
        records,
    })
}
