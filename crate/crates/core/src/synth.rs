//! Synthetic EEG with motor-imagery desynchronization and ErrP-like deflections.
//!
//! Two seeded substreams keep the background independent of protocol events:
//! the noise stream draws the background, oscillation phases and amplitude
//! jitter (a fixed number of draws per trial), and the protocol stream draws
//! the label shuffle followed by one uniform per trial for ErrP injection.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::types::{window_len, Dataset, Label, Matrix, Provenance, Trial};

pub const DEFAULT_CHANNELS: [&str; 8] = ["FC1", "FC2", "C3", "Cz", "C4", "CP1", "CP2", "Pz"];

/// Sign, centre (s) and width (s) of each Gaussian in the ErrP template.
pub const ERRP_COMPONENTS: [(f64, f64, f64); 3] = [(1.0, 0.200, 0.020), (-1.0, 0.252, 0.018), (1.0, 0.348, 0.030)];

/// Relative template gain on frontocentral neighbours of Cz.
const ERRP_NEIGHBOUR_GAIN: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub subject_id: String,
    pub fs_hz: f64,
    pub channels: Vec<String>,
    pub n_trials: usize,
    pub n_sessions: u32,
    pub window_s: (f64, f64),
    pub mi_interval_s: (f64, f64),
    /// Fractional contralateral mu/beta amplitude reduction during imagery.
    pub separability: f64,
    pub errp_rate: f64,
    /// Template peak amplitude in units of `noise_sd_uv`.
    pub errp_snr: f64,
    pub noise_sd_uv: f64,
    pub mu_hz: f64,
    pub beta_hz: f64,
    pub mu_amp_uv: f64,
    pub beta_amp_uv: f64,
    /// Relative sd of the per-trial rhythm amplitude.
    pub amp_jitter: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subject_id: "S01".into(),
            fs_hz: 500.0,
            channels: DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
            n_trials: 500,
            n_sessions: 5,
            window_s: (-1.0, 2.0),
            mi_interval_s: (0.0, 2.0),
            separability: 0.8,
            errp_rate: 0.05,
            errp_snr: 1.0,
            noise_sd_uv: 10.0,
            mu_hz: 10.0,
            beta_hz: 20.0,
            mu_amp_uv: 3.5,
            beta_amp_uv: 1.75,
            amp_jitter: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 2 {
            return Err(invalid("n_trials must be at least 2"));
        }
        if self.n_sessions == 0 || self.n_sessions as usize > self.n_trials {
            return Err(invalid("n_sessions must be in [1, n_trials]"));
        }
        for (name, v) in [("separability", self.separability), ("errp_rate", self.errp_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !(self.fs_hz > 0.0 && self.fs_hz.is_finite()) {
            return Err(invalid("fs_hz must be positive"));
        }
        let (w0, w1) = self.window_s;
        if !(w0 < w1) {
            return Err(invalid("empty window"));
        }
        let (m0, m1) = self.mi_interval_s;
        if !(w0 <= m0 && m0 < m1 && m1 <= w1) {
            return Err(invalid("imagery interval must lie inside the window"));
        }
        if ERRP_COMPONENTS.iter().any(|(_, c, _)| *c < w0 || *c > w1) {
            return Err(invalid("ErrP template centres fall outside the window"));
        }
        let nonneg = [
            self.errp_snr,
            self.noise_sd_uv,
            self.mu_amp_uv,
            self.beta_amp_uv,
            self.amp_jitter,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("amplitudes must be finite and non-negative"));
        }
        let nyquist = self.fs_hz / 2.0;
        if self.mu_hz <= 0.0 || self.beta_hz <= 0.0 || self.mu_hz >= nyquist || self.beta_hz >= nyquist {
            return Err(invalid("rhythm frequencies must lie in (0, fs/2)"));
        }
        if self.channels.is_empty() {
            return Err(invalid("no channels"));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        window_len(self.window_s, self.fs_hz)
    }

    fn channel(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }
}

/// ErrP template value at `t` seconds after onset, in units of the peak amplitude.
pub fn errp_template(t: f64) -> f64 {
    ERRP_COMPONENTS
        .iter()
        .map(|(sign, c, w)| sign * (-(t - c).powi(2) / (2.0 * w * w)).exp())
        .sum()
}

/// Reusable trial generator; holds the FFT plans for the background noise.
pub struct TrialGenerator {
    cfg: SynthConfig,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    envelope: Vec<f64>,
    template: Vec<f64>,
    c3: Option<usize>,
    c4: Option<usize>,
    errp_gain: Vec<f64>,
}

impl TrialGenerator {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_samples();
        let mut planner = FftPlanner::new();
        let envelope = (0..n)
            .map(|k| {
                let f = k.min(n - k) as f64 * cfg.fs_hz / n as f64;
                if k == 0 {
                    0.0
                } else {
                    1.0 / f.sqrt()
                }
            })
            .collect();
        let template = (0..n)
            .map(|i| errp_template(cfg.window_s.0 + i as f64 / cfg.fs_hz))
            .collect();
        let errp_gain = cfg
            .channels
            .iter()
            .map(|c| match c.as_str() {
                "Cz" => 1.0,
                "FC1" | "FC2" | "FCz" => ERRP_NEIGHBOUR_GAIN,
                _ => 0.0,
            })
            .collect();
        Ok(Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            envelope,
            template,
            c3: cfg.channel("C3"),
            c4: cfg.channel("C4"),
            errp_gain,
            cfg: cfg.clone(),
        })
    }

    fn pink_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = (0..self.n)
            .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
            .collect();
        self.fwd.process(&mut buf);
        for (b, e) in buf.iter_mut().zip(&self.envelope) {
            *b *= e;
        }
        self.inv.process(&mut buf);
        let re: Vec<f64> = buf.iter().map(|c| c.re).collect();
        let mean = re.iter().sum::<f64>() / self.n as f64;
        let sd = (re.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.n as f64).sqrt();
        let scale = if sd > 0.0 { self.cfg.noise_sd_uv / sd } else { 0.0 };
        re.iter().map(|v| (v - mean) * scale).collect()
    }

    /// One trial's channels x samples data. Draws a fixed number of values
    /// from `rng` regardless of `label` and `errp`.
    pub fn trial<R: Rng + ?Sized>(&self, label: Label, errp: bool, rng: &mut R) -> Matrix {
        let cfg = &self.cfg;
        let n_ch = cfg.channels.len();
        let mut data = Matrix::zeros(n_ch, self.n);
        for ch in 0..n_ch {
            let noise = self.pink_noise(rng);
            data.row_mut(ch).copy_from_slice(&noise);
        }
        // Rhythms on the sensorimotor pair; the channel contralateral to the
        // imagined hand is attenuated during the imagery interval.
        let contralateral = match label {
            Label::Right => self.c3,
            Label::Left => self.c4,
        };
        for ch in [self.c3, self.c4].into_iter().flatten() {
            let mut rhythm = [(cfg.mu_hz, cfg.mu_amp_uv), (cfg.beta_hz, cfg.beta_amp_uv)].map(|(f, a)| {
                let phase = rng.gen::<f64>() * 2.0 * PI;
                let jitter: f64 = StandardNormal.sample(rng);
                (f, (a * (1.0 + cfg.amp_jitter * jitter)).max(0.0), phase)
            });
            let attenuated = Some(ch) == contralateral;
            let row = data.row_mut(ch);
            for (i, v) in row.iter_mut().enumerate() {
                let t = cfg.window_s.0 + i as f64 / cfg.fs_hz;
                let gain = if attenuated && t >= cfg.mi_interval_s.0 && t < cfg.mi_interval_s.1 {
                    1.0 - cfg.separability
                } else {
                    1.0
                };
                for (f, a, p) in rhythm.iter_mut() {
                    *v += gain * *a * (2.0 * PI * *f * t + *p).sin();
                }
            }
        }
        if errp {
            let amp = cfg.errp_snr * cfg.noise_sd_uv;
            for (ch, g) in self.errp_gain.iter().enumerate() {
                if *g > 0.0 {
                    let row = data.row_mut(ch);
                    for (v, tpl) in row.iter_mut().zip(&self.template) {
                        *v += amp * g * tpl;
                    }
                }
            }
        }
        // Stored archives are float32; generate at that precision so that a
        // round trip is lossless.
        data.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        data
    }
}

fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let noise = ChaCha8Rng::seed_from_u64(seed);
    let mut protocol = ChaCha8Rng::seed_from_u64(seed);
    protocol.set_stream(1);
    (noise, protocol)
}

/// Balanced labels (alternating, then shuffled).
fn shuffled_labels<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Label> {
    let mut labels: Vec<Label> = (0..n).map(|i| Label::ALL[i % 2]).collect();
    labels.shuffle(rng);
    labels
}

fn assemble(cfg: &SynthConfig, labels: Vec<Label>, flags: Vec<bool>, noise: &mut ChaCha8Rng) -> Result<Dataset> {
    let gen = TrialGenerator::new(cfg)?;
    let n = cfg.n_trials;
    let trials = labels
        .into_iter()
        .zip(flags)
        .enumerate()
        .map(|(i, (label, errp))| Trial {
            data: gen.trial(label, errp, noise),
            label,
            errp_injected: errp,
            subject_id: cfg.subject_id.clone(),
            session_id: (i * cfg.n_sessions as usize / n) as u32 + 1,
            trial_index: i as u32,
            window_s: cfg.window_s,
            fs_hz: cfg.fs_hz,
        })
        .collect();
    Ok(Dataset {
        subject_id: cfg.subject_id.clone(),
        trials,
        channel_names: cfg.channels.clone(),
        fs_hz: cfg.fs_hz,
        window_s: cfg.window_s,
        provenance: Provenance::Synthetic,
    })
}

/// Generates one subject. Sessions are numbered from 1 in equal consecutive blocks.
pub fn generate_subject(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (mut noise, mut protocol) = streams(cfg.seed);
    let labels = shuffled_labels(cfg.n_trials, &mut protocol);
    let flags = (0..cfg.n_trials).map(|_| protocol.gen::<f64>() < cfg.errp_rate).collect();
    assemble(cfg, labels, flags, &mut noise)
}

/// Generates a dataset with exactly `n_error` ErrP trials and `n_correct`
/// clean trials in shuffled order; `errp_rate` and `n_trials` are ignored.
pub fn generate_errp_study(cfg: &SynthConfig, n_error: usize, n_correct: usize) -> Result<Dataset> {
    let cfg = SynthConfig {
        n_trials: n_error + n_correct,
        n_sessions: 1,
        ..cfg.clone()
    };
    cfg.validate()?;
    let (mut noise, mut protocol) = streams(cfg.seed);
    let labels = shuffled_labels(cfg.n_trials, &mut protocol);
    let mut flags: Vec<bool> = (0..cfg.n_trials).map(|i| i < n_error).collect();
    flags.shuffle(&mut protocol);
    assemble(&cfg, labels, flags, &mut noise)
}
