//! Preprocessing: windowed-sinc FIR design and application, epoching around
//! onset markers, and baseline correction.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::types::{window_len, Label, Matrix, SignalRecord, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
    Bandstop,
}

impl FilterKind {
    fn n_cutoffs(self) -> usize {
        match self {
            FilterKind::Lowpass | FilterKind::Highpass => 1,
            FilterKind::Bandpass | FilterKind::Bandstop => 2,
        }
    }
}

/// Type-I linear-phase FIR kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirKernel {
    pub taps: Vec<f64>,
    pub fs_hz: f64,
    pub kind: FilterKind,
    pub cutoffs_hz: Vec<f64>,
}

impl FirKernel {
    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Magnitude of the frequency response at `f_hz`.
    pub fn gain_at(&self, f_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / self.fs_hz;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, h)| {
                (re + h * (w * n as f64).cos(), im - h * (w * n as f64).sin())
            });
        re.hypot(im)
    }
}

fn hamming(n_taps: usize) -> Vec<f64> {
    let m = (n_taps - 1) as f64;
    (0..n_taps)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / m).cos())
        .collect()
}

/// Hamming-windowed sinc lowpass with unit DC gain.
fn lowpass_taps(cutoff_hz: f64, n_taps: usize, fs_hz: f64) -> Vec<f64> {
    let fc = cutoff_hz / fs_hz;
    let mid = (n_taps - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = hamming(n_taps)
        .into_iter()
        .enumerate()
        .map(|(n, w)| {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            sinc * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

fn spectral_inversion(mut taps: Vec<f64>) -> Vec<f64> {
    taps.iter_mut().for_each(|t| *t = -*t);
    let mid = (taps.len() - 1) / 2;
    taps[mid] += 1.0;
    taps
}

pub fn design_windowed_sinc(
    kind: FilterKind,
    cutoffs_hz: &[f64],
    n_taps: usize,
    fs_hz: f64,
) -> Result<FirKernel> {
    if n_taps < 3 || n_taps.is_multiple_of(2) {
        return Err(invalid(format!("tap count {n_taps} must be odd and at least 3")));
    }
    if !(fs_hz > 0.0) {
        return Err(invalid("sampling rate must be positive"));
    }
    if cutoffs_hz.len() != kind.n_cutoffs() {
        return Err(invalid(format!(
            "{kind:?} takes {} cutoff(s), got {}",
            kind.n_cutoffs(),
            cutoffs_hz.len()
        )));
    }
    let nyquist = fs_hz / 2.0;
    if let Some(f) = cutoffs_hz.iter().find(|&&f| !(f > 0.0 && f < nyquist)) {
        return Err(invalid(format!("cutoff {f} Hz outside (0, {nyquist}) Hz")));
    }
    if cutoffs_hz.len() == 2 && cutoffs_hz[0] >= cutoffs_hz[1] {
        return Err(invalid("band edges must be increasing"));
    }

    let taps = match kind {
        FilterKind::Lowpass => lowpass_taps(cutoffs_hz[0], n_taps, fs_hz),
        FilterKind::Highpass => spectral_inversion(lowpass_taps(cutoffs_hz[0], n_taps, fs_hz)),
        FilterKind::Bandpass | FilterKind::Bandstop => {
            let lo = lowpass_taps(cutoffs_hz[0], n_taps, fs_hz);
            let hi = lowpass_taps(cutoffs_hz[1], n_taps, fs_hz);
            let band: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
            if kind == FilterKind::Bandpass {
                band
            } else {
                spectral_inversion(band)
            }
        }
    };
    Ok(FirKernel {
        taps,
        fs_hz,
        kind,
        cutoffs_hz: cutoffs_hz.to_vec(),
    })
}

/// Default tap count: transition width `max(0.25 * edge, 2 Hz)` capped by the
/// room available next to the band edges, sized with the Hamming `3.3 / df` rule.
pub fn default_n_taps(kind: FilterKind, cutoffs_hz: &[f64], fs_hz: f64) -> usize {
    let nyquist = fs_hz / 2.0;
    let max_df = match kind {
        FilterKind::Highpass => cutoffs_hz[0],
        FilterKind::Lowpass => nyquist - cutoffs_hz[0],
        FilterKind::Bandpass => cutoffs_hz[0].min(nyquist - cutoffs_hz[1]),
        FilterKind::Bandstop => (cutoffs_hz[1] - cutoffs_hz[0]) / 2.0,
    };
    let reference = match kind {
        FilterKind::Highpass | FilterKind::Bandstop => max_df,
        FilterKind::Lowpass | FilterKind::Bandpass => cutoffs_hz[0],
    };
    let df = (reference * 0.25).max(2.0).min(max_df);
    let order = (3.3 / (df / fs_hz) / 2.0).ceil() as usize * 2;
    order + 1
}

const DIRECT_CONV_MAX_TAPS: usize = 64;

/// Delay-compensated ("same") convolution with zero padding.
pub fn filter_signal(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delay = (taps.len() - 1) / 2;
    if n == 0 {
        return Vec::new();
    }
    if taps.len() <= DIRECT_CONV_MAX_TAPS {
        return (0..n)
            .map(|i| {
                taps.iter()
                    .enumerate()
                    .filter_map(|(k, h)| {
                        let j = i as isize + delay as isize - k as isize;
                        (0..n as isize).contains(&j).then(|| h * x[j as usize])
                    })
                    .sum()
            })
            .collect();
    }
    let full = fft_convolve(x, taps);
    full[delay..delay + n].to_vec()
}

/// Full linear convolution via FFT, length `a.len() + b.len() - 1`.
pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex64> = pad_complex(a, size);
    let mut fb: Vec<Complex64> = pad_complex(b, size);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (p, q) in fa.iter_mut().zip(&fb) {
        *p *= q;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..len].iter().map(|c| c.re * scale).collect()
}

fn pad_complex(x: &[f64], size: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); size];
    for (o, v) in out.iter_mut().zip(x) {
        o.re = *v;
    }
    out
}

pub fn apply_fir(record: &SignalRecord, kernel: &FirKernel) -> Result<SignalRecord> {
    if kernel.fs_hz != record.fs_hz() {
        return Err(invalid(format!(
            "kernel designed for {} Hz, record sampled at {} Hz",
            kernel.fs_hz,
            record.fs_hz()
        )));
    }
    let src = record.samples();
    let mut out = Matrix::zeros(src.rows(), src.cols());
    for ch in 0..src.rows() {
        let y = filter_signal(src.row(ch), &kernel.taps);
        out.row_mut(ch).copy_from_slice(&y);
    }
    Ok(record.with_samples(out))
}

/// Label and ErrP flag assigned to epochs cut at markers with a given code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTag {
    pub label: Label,
    pub errp_injected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSpec {
    pub window_s: (f64, f64),
    pub include: BTreeMap<String, TrialTag>,
    pub exclude: BTreeSet<String>,
    pub subject_id: String,
    pub session_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epochs {
    pub trials: Vec<Trial>,
    /// Included markers whose window ran past the recording bounds.
    pub skipped: usize,
}

pub fn epochize(record: &SignalRecord, spec: &EpochSpec) -> Result<Epochs> {
    let (t0, t1) = spec.window_s;
    if !(t0 < t1) {
        return Err(invalid(format!("epoch window ({t0}, {t1}) is empty")));
    }
    let fs = record.fs_hz();
    let len = window_len(spec.window_s, fs);
    let total = record.n_samples() as isize;
    let mut trials = Vec::new();
    let mut skipped = 0;
    for marker in record.markers() {
        if spec.exclude.contains(&marker.code) {
            continue;
        }
        let Some(tag) = spec.include.get(&marker.code) else {
            continue;
        };
        let start = (marker.sample as f64 + t0 * fs).round() as isize;
        let end = start + len as isize;
        if start < 0 || end > total {
            skipped += 1;
            continue;
        }
        let data = record.samples().slice_cols(start as usize, end as usize);
        trials.push(Trial {
            data,
            label: tag.label,
            errp_injected: tag.errp_injected,
            subject_id: spec.subject_id.clone(),
            session_id: spec.session_id,
            trial_index: trials.len() as u32,
            window_s: spec.window_s,
            fs_hz: fs,
        });
    }
    Ok(Epochs { trials, skipped })
}

/// Sample indices whose time stamps fall in `[a, b]` (inclusive) for an axis
/// starting at `window.0` with `n` samples.
pub fn time_indices(
    window_s: (f64, f64),
    fs_hz: f64,
    n: usize,
    interval_s: (f64, f64),
) -> Option<RangeInclusive<usize>> {
    const EPS: f64 = 1e-9;
    let (a, b) = interval_s;
    if a > b || a < window_s.0 - EPS || b > window_s.1 + EPS {
        return None;
    }
    let first = ((a - window_s.0) * fs_hz - EPS).ceil().max(0.0) as usize;
    let last = (((b - window_s.0) * fs_hz + EPS).floor() as usize).min(n.checked_sub(1)?);
    (first <= last).then_some(first..=last)
}

pub fn baseline_correct(trial: &Trial, baseline_s: (f64, f64)) -> Result<Trial> {
    let range = time_indices(trial.window_s, trial.fs_hz, trial.n_samples(), baseline_s)
        .ok_or(Error::BaselineOutsideWindow)?;
    let mut out = trial.clone();
    let count = range.clone().count() as f64;
    for ch in 0..out.data.rows() {
        let row = out.data.row_mut(ch);
        let mean = row[range.clone()].iter().sum::<f64>() / count;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(out)
}
