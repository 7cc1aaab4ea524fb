//! Complex Morlet continuous wavelet transform.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::types::Matrix;

/// Half-width of the wavelet support in units of the Gaussian envelope's
/// standard deviation.
pub const DEFAULT_SUPPORT_SIGMAS: f64 = 5.0;

/// Time-frequency power map.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMap {
    pub power: Matrix,
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
}

/// Unit-energy complex Morlet wavelet sampled at `fs_hz`.
pub fn morlet_wavelet(freq_hz: f64, n_cycles: f64, fs_hz: f64, support_sigmas: f64) -> Vec<Complex64> {
    let sigma_t = n_cycles / (2.0 * PI * freq_hz);
    let half = (support_sigmas * sigma_t * fs_hz).floor() as isize;
    let mut w: Vec<Complex64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / fs_hz;
            let env = (-t * t / (2.0 * sigma_t * sigma_t)).exp();
            Complex64::from_polar(env, 2.0 * PI * freq_hz * t)
        })
        .collect();
    let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    w.iter_mut().for_each(|c| *c /= norm);
    w
}

/// Precomputed wavelet spectra for one signal length, reusable across trials.
pub struct MorletBank {
    freqs_hz: Vec<f64>,
    n_samples: usize,
    fft_len: usize,
    /// Per frequency: wavelet spectrum and half-length (group delay).
    spectra: Vec<(Vec<Complex64>, usize)>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl MorletBank {
    pub fn new(
        fs_hz: f64,
        freqs_hz: &[f64],
        n_cycles: &[f64],
        n_samples: usize,
        support_sigmas: f64,
    ) -> Result<Self> {
        if freqs_hz.is_empty() {
            return Err(invalid("empty frequency list"));
        }
        if freqs_hz.len() != n_cycles.len() {
            return Err(invalid("freqs and n_cycles differ in length"));
        }
        let nyquist = fs_hz / 2.0;
        if let Some(f) = freqs_hz.iter().find(|&&f| !(f > 0.0 && f < nyquist)) {
            return Err(invalid(format!("frequency {f} Hz outside (0, {nyquist}) Hz")));
        }
        if n_cycles.iter().any(|&c| !(c > 0.0)) {
            return Err(invalid("cycle counts must be positive"));
        }
        if n_samples == 0 {
            return Err(invalid("empty signal"));
        }
        let wavelets: Vec<Vec<Complex64>> = freqs_hz
            .iter()
            .zip(n_cycles)
            .map(|(&f, &c)| morlet_wavelet(f, c, fs_hz, support_sigmas))
            .collect();
        let longest = wavelets.iter().map(Vec::len).max().unwrap_or(1);
        let fft_len = (n_samples + longest - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        let spectra = wavelets
            .into_iter()
            .map(|w| {
                let half = (w.len() - 1) / 2;
                let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
                buf[..w.len()].copy_from_slice(&w);
                fwd.process(&mut buf);
                (buf, half)
            })
            .collect();
        Ok(Self {
            freqs_hz: freqs_hz.to_vec(),
            n_samples,
            fft_len,
            spectra,
            fwd,
            inv,
        })
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    /// Largest wavelet half-length in samples.
    pub fn max_half_len(&self) -> usize {
        self.spectra.iter().map(|(_, h)| *h).max().unwrap_or(0)
    }

    /// `|x * w_f|^2` for every frequency, centered so output sample `n`
    /// aligns with input sample `n`.
    pub fn power(&self, signal: &[f64]) -> Result<Matrix> {
        if signal.len() != self.n_samples {
            return Err(crate::error::Error::DimensionMismatch {
                expected: self.n_samples,
                got: signal.len(),
            });
        }
        let mut sig = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (s, v) in sig.iter_mut().zip(signal) {
            s.re = *v;
        }
        self.fwd.process(&mut sig);
        let scale = 1.0 / self.fft_len as f64;
        let mut out = Matrix::zeros(self.freqs_hz.len(), self.n_samples);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (fi, (spec, half)) in self.spectra.iter().enumerate() {
            for ((b, s), w) in buf.iter_mut().zip(&sig).zip(spec) {
                *b = s * w;
            }
            self.inv.process(&mut buf);
            let row = out.row_mut(fi);
            for (n, r) in row.iter_mut().enumerate() {
                *r = (buf[n + half] * scale).norm_sqr();
            }
        }
        Ok(out)
    }
}

pub fn morlet_cwt(signal: &[f64], fs_hz: f64, freqs_hz: &[f64], n_cycles: &[f64]) -> Result<TfMap> {
    let bank = MorletBank::new(fs_hz, freqs_hz, n_cycles, signal.len(), DEFAULT_SUPPORT_SIGMAS)?;
    let power = bank.power(signal)?;
    Ok(TfMap {
        power,
        freqs_hz: freqs_hz.to_vec(),
        times_s: (0..signal.len()).map(|i| i as f64 / fs_hz).collect(),
    })
}

/// Rows of `tf` whose frequency lies in `[lo, hi]`.
pub fn band_power(tf: &TfMap, band_hz: (f64, f64)) -> Result<Matrix> {
    const EPS: f64 = 1e-9;
    let rows: Vec<usize> = tf
        .freqs_hz
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= band_hz.0 - EPS && f <= band_hz.1 + EPS)
        .map(|(i, _)| i)
        .collect();
    let (Some(&first), Some(&last)) = (rows.first(), rows.last()) else {
        return Err(invalid(format!(
            "band ({}, {}) Hz does not intersect the frequency grid",
            band_hz.0, band_hz.1
        )));
    };
    Ok(tf.power.slice_rows(first, last + 1))
}

/// Integer-stepped grid `lo, lo + step, ..., <= hi`.
pub fn freq_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelet_is_unit_energy() {
        let w = morlet_wavelet(10.0, 5.0, 500.0, 5.0);
        let e: f64 = w.iter().map(|c| c.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-12);
        assert_eq!(w.len() % 2, 1);
    }

    /// Plain O(N * L) convolution used as the reference.
    fn direct_power(x: &[f64], w: &[Complex64]) -> Vec<f64> {
        let half = (w.len() - 1) as isize / 2;
        (0..x.len() as isize)
            .map(|n| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, wk) in w.iter().enumerate() {
                    let j = n + half - k as isize;
                    if (0..x.len() as isize).contains(&j) {
                        acc += wk * x[j as usize];
                    }
                }
                acc.norm_sqr()
            })
            .collect()
    }

    #[test]
    fn fft_route_matches_direct_convolution() {
        let fs = 250.0;
        let x: Vec<f64> = (0..300).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
        let freqs = [4.0, 11.0, 27.0];
        let cycles = [2.0, 5.5, 13.5];
        let tf = morlet_cwt(&x, fs, &freqs, &cycles).unwrap();
        for (fi, (&f, &c)) in freqs.iter().zip(&cycles).enumerate() {
            let reference = direct_power(&x, &morlet_wavelet(f, c, fs, DEFAULT_SUPPORT_SIGMAS));
            for (a, b) in tf.power.row(fi).iter().zip(&reference) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }

    /// DFT magnitude at frequency `f`, the independent spectral reference.
    fn dft_mag(x: &[f64], f: f64, fs: f64) -> f64 {
        let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, v)| {
            let ph = 2.0 * PI * f * n as f64 / fs;
            (re + v * ph.cos(), im - v * ph.sin())
        });
        re.hypot(im)
    }

    #[test]
    fn pure_tone_peaks_at_its_frequency() {
        let fs = 500.0;
        let x: Vec<f64> = (0..1000).map(|n| (2.0 * PI * 10.0 * n as f64 / fs).sin()).collect();
        let freqs = freq_grid(3.0, 30.0, 1.0);
        let cycles: Vec<f64> = freqs.iter().map(|f| f / 2.0).collect();
        let tf = morlet_cwt(&x, fs, &freqs, &cycles).unwrap();
        let mean_power: Vec<f64> = (0..freqs.len())
            .map(|i| tf.power.row(i).iter().sum::<f64>() / 1000.0)
            .collect();
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap()
        };
        let dft: Vec<f64> = freqs.iter().map(|&f| dft_mag(&x, f, fs)).collect();
        assert_eq!(freqs[argmax(&mean_power)], 10.0);
        assert_eq!(argmax(&mean_power), argmax(&dft));
    }

    #[test]
    fn zero_signal_has_zero_power() {
        let tf = morlet_cwt(&[0.0; 200], 100.0, &[5.0, 10.0], &[3.0, 3.0]).unwrap();
        assert!(tf.power.data().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(morlet_cwt(&[1.0; 10], 100.0, &[], &[]).is_err());
        assert!(morlet_cwt(&[1.0; 10], 100.0, &[50.0], &[3.0]).is_err());
        assert!(morlet_cwt(&[1.0; 10], 100.0, &[5.0], &[3.0, 4.0]).is_err());
    }

    #[test]
    fn band_rows() {
        let freqs = freq_grid(3.0, 30.0, 1.0);
        assert_eq!(freqs.len(), 28);
        let tf = TfMap {
            power: Matrix::zeros(28, 4),
            freqs_hz: freqs,
            times_s: vec![0.0; 4],
        };
        assert_eq!(band_power(&tf, (6.0, 13.0)).unwrap().rows(), 8);
        assert_eq!(band_power(&tf, (17.0, 30.0)).unwrap().rows(), 14);
        assert!(band_power(&tf, (40.0, 50.0)).is_err());
    }
}
