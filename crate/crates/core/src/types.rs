//! Domain types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Copy of rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Copy of columns `[start, end)` of every row.
    pub fn slice_cols(&self, start: usize, end: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Matrix {
            rows: self.rows,
            cols: end - start,
            data,
        }
    }
}

/// Motor-imagery class, doubling as the bandit arm index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Left = 0,
    Right = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Left, Label::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Label::Left),
            1 => Ok(Label::Right),
            other => Err(invalid(format!("label {other} not in {{0,1}}"))),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Label::Left => Label::Right,
            Label::Right => Label::Left,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_index(v as usize).map_err(serde::de::Error::custom)
    }
}

/// Event marker in a continuous recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub sample: usize,
    pub code: String,
}

impl Marker {
    pub fn new(sample: usize, code: impl Into<String>) -> Self {
        Self {
            sample,
            code: code.into(),
        }
    }
}

/// Continuous multichannel recording in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    channel_names: Vec<String>,
    fs_hz: f64,
    samples: Matrix,
    markers: Vec<Marker>,
}

impl SignalRecord {
    pub fn new(
        channel_names: Vec<String>,
        fs_hz: f64,
        samples: Matrix,
        markers: Vec<Marker>,
    ) -> Result<Self> {
        if !(fs_hz > 0.0 && fs_hz.is_finite()) {
            return Err(invalid(format!("sampling rate {fs_hz} must be positive")));
        }
        if samples.rows() != channel_names.len() {
            return Err(Error::DimensionMismatch {
                expected: channel_names.len(),
                got: samples.rows(),
            });
        }
        if let Some(m) = markers.iter().find(|m| m.sample >= samples.cols()) {
            return Err(invalid(format!(
                "marker {} at sample {} outside [0, {})",
                m.code,
                m.sample,
                samples.cols()
            )));
        }
        Ok(Self {
            channel_names,
            fs_hz,
            samples,
            markers,
        })
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn n_samples(&self) -> usize {
        self.samples.cols()
    }

    pub(crate) fn with_samples(&self, samples: Matrix) -> Self {
        Self {
            channel_names: self.channel_names.clone(),
            fs_hz: self.fs_hz,
            samples,
            markers: self.markers.clone(),
        }
    }
}

/// Number of samples spanned by a `[t0, t1)` window.
pub fn window_len(window_s: (f64, f64), fs_hz: f64) -> usize {
    ((window_s.1 - window_s.0) * fs_hz).round() as usize
}

/// One epoched window around an onset marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub data: Matrix,
    pub label: Label,
    pub errp_injected: bool,
    pub subject_id: String,
    pub session_id: u32,
    pub trial_index: u32,
    pub window_s: (f64, f64),
    pub fs_hz: f64,
}

impl Trial {
    pub fn validate(&self) -> Result<()> {
        let expected = window_len(self.window_s, self.fs_hz);
        if self.data.cols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.data.cols(),
            });
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.data.rows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.cols()
    }

    /// Sample index of time `t` (seconds, relative to onset).
    pub fn sample_at(&self, t: f64) -> isize {
        ((t - self.window_s.0) * self.fs_hz).round() as isize
    }

    /// Time axis in seconds relative to onset.
    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples())
            .map(|i| self.window_s.0 + i as f64 / self.fs_hz)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    CompetitionLike,
    InHouseLike,
    Synthetic,
}

/// Ordered collection of trials from one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subject_id: String,
    pub trials: Vec<Trial>,
    pub channel_names: Vec<String>,
    pub fs_hz: f64,
    pub window_s: (f64, f64),
    pub provenance: Provenance,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for t in &self.trials {
            t.validate()?;
            if t.n_channels() != self.channel_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.channel_names.len(),
                    got: t.n_channels(),
                });
            }
            if t.fs_hz != self.fs_hz || t.window_s != self.window_s {
                return Err(invalid(format!(
                    "trial {} does not share the dataset's sampling rate and window",
                    t.trial_index
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn n_samples(&self) -> usize {
        window_len(self.window_s, self.fs_hz)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }

    /// Same metadata, different trial list.
    pub fn with_trials(&self, trials: Vec<Trial>) -> Dataset {
        Dataset {
            subject_id: self.subject_id.clone(),
            trials,
            channel_names: self.channel_names.clone(),
            fs_hz: self.fs_hz,
            window_s: self.window_s,
            provenance: self.provenance,
        }
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_rejects_out_of_range_marker() {
        let m = Matrix::zeros(2, 10);
        let err = SignalRecord::new(
            vec!["C3".into(), "C4".into()],
            500.0,
            m,
            vec![Marker::new(10, "left")],
        );
        assert!(err.is_err());
    }

    #[test]
    fn record_rejects_channel_count_mismatch() {
        let m = Matrix::zeros(3, 10);
        assert!(SignalRecord::new(vec!["C3".into()], 500.0, m, vec![]).is_err());
    }

    #[test]
    fn label_serializes_as_integer() {
        assert_eq!(serde_json::to_string(&Label::Right).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Label>("0").unwrap(), Label::Left);
        assert!(serde_json::from_str::<Label>("2").is_err());
    }

    #[test]
    fn window_length_rounds() {
        assert_eq!(window_len((-1.0, 2.0), 500.0), 1500);
        assert_eq!(window_len((-1.0, 2.0), 250.0), 750);
    }
}
