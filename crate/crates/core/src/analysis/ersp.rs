use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::time_indices;
use crate::error::{invalid, Error, Result};
use crate::features::{freq_grid, MorletBank};
use crate::stats::{fdr_bh, permutation_test_pointwise};
use crate::types::{Matrix, Trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErspConfig {
    pub freqs_hz: Vec<f64>,
    /// `(c0, c1)`: cycles grow as `c0 * (f / f_min)^c1`.
    pub cycles_param: (f64, f64),
    pub baseline_s: (f64, f64),
    /// Spacing of the output time axis.
    pub time_step_s: f64,
    /// Wavelet half-support in envelope standard deviations. Output times
    /// are cropped to where the lowest-frequency wavelet fits in the epoch.
    pub support_sigmas: f64,
}

impl Default for ErspConfig {
    fn default() -> Self {
        Self {
            freqs_hz: freq_grid(3.0, 30.0, 1.0),
            cycles_param: (2.0, 0.1),
            baseline_s: (-0.75, -0.5),
            time_step_s: 0.01,
            support_sigmas: 3.0,
        }
    }
}

impl ErspConfig {
    fn f_min(&self) -> f64 {
        self.freqs_hz.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn n_cycles(&self) -> Vec<f64> {
        let f_min = self.f_min();
        self.freqs_hz
            .iter()
            .map(|&f| cycles_at(f, self.cycles_param, f_min))
            .collect()
    }
}

pub fn cycles_at(freq_hz: f64, cycles_param: (f64, f64), f_min_hz: f64) -> f64 {
    cycles_param.0 * (freq_hz / f_min_hz).powf(cycles_param.1)
}

/// Trial-averaged power relative to baseline, freqs x times in decibels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErspMap {
    pub db: Matrix,
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
    pub baseline_s: (f64, f64),
    pub cycles_param: (f64, f64),
}

/// Per-trial power on the output grid plus each trial's mean baseline power
/// per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMaps {
    pub maps: Vec<Matrix>,
    pub baseline: Vec<Vec<f64>>,
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
}

pub fn trial_power_maps(trials: &[Trial], channel: usize, cfg: &ErspConfig) -> Result<PowerMaps> {
    let first = trials.first().ok_or(Error::EmptyPartition("no trials"))?;
    let (fs, window, n) = (first.fs_hz, first.window_s, first.n_samples());
    if trials.iter().any(|t| t.fs_hz != fs || t.window_s != window || t.n_samples() != n) {
        return Err(invalid("trials do not share sampling rate and window"));
    }
    if channel >= first.n_channels() {
        return Err(invalid(format!("channel {channel} out of range")));
    }
    if !(cfg.time_step_s > 0.0) || !(cfg.support_sigmas > 0.0) {
        return Err(invalid("time step and support must be positive"));
    }
    let base = time_indices(window, fs, n, cfg.baseline_s).ok_or(Error::BaselineOutsideWindow)?;
    let bank = MorletBank::new(fs, &cfg.freqs_hz, &cfg.n_cycles(), n, cfg.support_sigmas)?;

    let half = bank.max_half_len();
    if 2 * half >= n {
        return Err(invalid("epoch too short for the lowest-frequency wavelet"));
    }
    // Baseline samples where the widest wavelet overhangs the epoch are edge artifacts.
    let base = (*base.start()).max(half)..=(*base.end()).min(n - half - 1);
    if base.is_empty() {
        return Err(Error::BaselineOutsideWindow);
    }
    let step = ((cfg.time_step_s * fs).round() as usize).max(1);
    let onset = (-window.0 * fs).round().max(0.0) as usize % step;
    let columns: Vec<usize> = (half..n - half).filter(|i| i % step == onset).collect();
    let times_s = columns.iter().map(|&i| window.0 + i as f64 / fs).collect();

    let per_trial: Vec<(Matrix, Vec<f64>)> = trials
        .par_iter()
        .map(|t| {
            let power = bank.power(t.data.row(channel))?;
            let n_f = power.rows();
            let mut map = Matrix::zeros(n_f, columns.len());
            let mut baseline = Vec::with_capacity(n_f);
            for f in 0..n_f {
                let row = power.row(f);
                for (o, &c) in map.row_mut(f).iter_mut().zip(&columns) {
                    *o = row[c];
                }
                baseline.push(row[base.clone()].iter().sum::<f64>() / base.clone().count() as f64);
            }
            Ok((map, baseline))
        })
        .collect::<Result<_>>()?;
    let (maps, baseline) = per_trial.into_iter().unzip();
    Ok(PowerMaps {
        maps,
        baseline,
        freqs_hz: cfg.freqs_hz.clone(),
        times_s,
    })
}

/// `10 log10(mean power / mean baseline power)` over trials on one channel.
pub fn ersp(trials: &[Trial], channel: usize, cfg: &ErspConfig) -> Result<ErspMap> {
    let pm = trial_power_maps(trials, channel, cfg)?;
    let n = pm.maps.len() as f64;
    let (n_f, n_t) = (pm.maps[0].rows(), pm.maps[0].cols());
    let mut mean = Matrix::zeros(n_f, n_t);
    for m in &pm.maps {
        for (a, v) in mean.data_mut().iter_mut().zip(m.data()) {
            *a += v;
        }
    }
    let mut db = Matrix::zeros(n_f, n_t);
    for f in 0..n_f {
        let base = pm.baseline.iter().map(|b| b[f]).sum::<f64>() / n;
        for (d, p) in db.row_mut(f).iter_mut().zip(mean.row(f)) {
            *d = 10.0 * ((p / n) / base).log10();
        }
    }
    if db.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ERSP map"));
    }
    Ok(ErspMap {
        db,
        freqs_hz: pm.freqs_hz,
        times_s: pm.times_s,
        baseline_s: cfg.baseline_s,
        cycles_param: cfg.cycles_param,
    })
}

/// Pointwise significance of the difference between two conditions' power
/// maps; `mask`, `p_values` and `p_adjusted` are freqs x times, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErspComparison {
    pub mask: Vec<bool>,
    pub p_values: Vec<f64>,
    pub p_adjusted: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
}

impl ErspComparison {
    pub fn is_significant(&self, freq_index: usize, time_index: usize) -> bool {
        self.mask[freq_index * self.times_s.len() + time_index]
    }
}

pub fn compare_conditions_ersp<R: Rng + ?Sized>(
    cond_a: &[Trial],
    cond_b: &[Trial],
    channel: usize,
    cfg: &ErspConfig,
    n_perm: usize,
    q: f64,
    rng: &mut R,
) -> Result<ErspComparison> {
    if cond_a.is_empty() {
        return Err(Error::EmptyPartition("condition a"));
    }
    if cond_b.is_empty() {
        return Err(Error::EmptyPartition("condition b"));
    }
    let a = trial_power_maps(cond_a, channel, cfg)?;
    let b = trial_power_maps(cond_b, channel, cfg)?;
    if a.times_s != b.times_s {
        return Err(invalid("conditions have different time axes"));
    }
    let stack = |pm: &PowerMaps| {
        let cols = pm.maps[0].data().len();
        let data = pm.maps.iter().flat_map(|m| m.data().iter().copied()).collect();
        Matrix::from_vec(pm.maps.len(), cols, data)
    };
    let p = permutation_test_pointwise(&stack(&a)?, &stack(&b)?, n_perm, rng)?;
    let fdr = fdr_bh(&p, q)?;
    Ok(ErspComparison {
        mask: fdr.reject,
        p_values: p,
        p_adjusted: fdr.p_adjusted,
        freqs_hz: a.freqs_hz,
        times_s: a.times_s,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::types::Label;

    fn tone_trial(freq: f64, amp: impl Fn(f64) -> f64, phase: f64) -> Trial {
        let fs = 500.0;
        let n = 1500;
        let data = (0..n)
            .map(|i| {
                let t = -1.0 + i as f64 / fs;
                amp(t) * (2.0 * PI * freq * t + phase).sin()
            })
            .collect();
        Trial {
            data: Matrix::from_vec(1, n, data).unwrap(),
            label: Label::Left,
            errp_injected: false,
            subject_id: "s".into(),
            session_id: 1,
            trial_index: 0,
            window_s: (-1.0, 2.0),
            fs_hz: fs,
        }
    }

    #[test]
    fn cycles_at_band_edges() {
        assert!((cycles_at(3.0, (2.0, 0.1), 3.0) - 2.0).abs() < 1e-12);
        assert!((cycles_at(30.0, (2.0, 0.1), 3.0) - 2.0 * 10f64.powf(0.1)).abs() < 1e-12);
        assert!((cycles_at(30.0, (2.0, 0.1), 3.0) - 2.517).abs() < 1e-3);
    }

    #[test]
    fn stationary_tone_is_flat() {
        let trials: Vec<Trial> = (0..16).map(|k| tone_trial(10.0, |_| 5.0, 2.0 * PI * k as f64 / 16.0)).collect();
        let map = ersp(&trials, 0, &ErspConfig::default()).unwrap();
        assert!(map.db.data().iter().all(|v| v.abs() < 0.5));
    }

    #[test]
    fn baseline_inside_wavelet_overhang_rejected() {
        let cfg = ErspConfig {
            baseline_s: (-0.95, -0.75),
            ..Default::default()
        };
        assert!(matches!(
            ersp(&[tone_trial(10.0, |_| 1.0, 0.0)], 0, &cfg),
            Err(Error::BaselineOutsideWindow)
        ));
    }

    #[test]
    fn doubling_gives_six_db() {
        let trials: Vec<Trial> = (0..4)
            .map(|k| tone_trial(10.0, |t| if t < 0.0 { 1.0 } else { 2.0 }, k as f64))
            .collect();
        let map = ersp(&trials, 0, &ErspConfig::default()).unwrap();
        let f = map.freqs_hz.iter().position(|&f| f == 10.0).unwrap();
        for (t, v) in map.times_s.iter().zip(map.db.row(f)) {
            if *t >= 0.5 {
                assert!((v - 10.0 * 4f64.log10()).abs() < 0.5, "t {t} db {v}");
            }
        }
    }

    #[test]
    fn output_axis_is_cropped_and_includes_onset() {
        let map = ersp(&[tone_trial(10.0, |_| 1.0, 0.0)], 0, &ErspConfig::default()).unwrap();
        assert!(map.times_s[0] > -1.0 && *map.times_s.last().unwrap() < 2.0);
        assert!(map.times_s.iter().any(|t| t.abs() < 1e-9));
        assert_eq!(map.db.rows(), 28);
    }

    #[test]
    fn baseline_outside_epoch() {
        let cfg = ErspConfig {
            baseline_s: (-1.5, -1.2),
            ..Default::default()
        };
        assert!(matches!(
            ersp(&[tone_trial(10.0, |_| 1.0, 0.0)], 0, &cfg),
            Err(Error::BaselineOutsideWindow)
        ));
    }

    #[test]
    fn empty_condition_rejected() {
        let t = vec![tone_trial(10.0, |_| 1.0, 0.0); 3];
        let mut rng = rand::thread_rng();
        assert!(compare_conditions_ersp(&t, &[], 0, &ErspConfig::default(), 10, 0.05, &mut rng).is_err());
    }
}
