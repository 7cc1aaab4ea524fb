//! Trial archive persistence.
//!
//! An archive is a directory holding three files:
//!
//! - `header.json`: shape and acquisition metadata
//! - `data.f32`: little-endian `f32`, laid out `[trial][channel][sample]`
//! - `labels.json`: one `{label, errp_injected, session_id, trial_index}` per trial

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, Error, Result};
use crate::types::{Dataset, Label, Matrix, Provenance, Trial};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub format_version: u32,
    pub subject_id: String,
    pub fs_hz: f64,
    pub channel_names: Vec<String>,
    pub n_trials: usize,
    pub n_samples: usize,
    pub window_s: (f64, f64),
    pub provenance: Provenance,
}

/// Per-trial metadata row shared by trial archives and feature sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub label: Label,
    pub errp_injected: bool,
    pub session_id: u32,
    pub trial_index: u32,
}

pub fn save_trial_archive(dataset: &Dataset, dir: &Path) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyArchive);
    }
    dataset.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let header = ArchiveHeader {
        format_version: FORMAT_VERSION,
        subject_id: dataset.subject_id.clone(),
        fs_hz: dataset.fs_hz,
        channel_names: dataset.channel_names.clone(),
        n_trials: dataset.len(),
        n_samples: dataset.n_samples(),
        window_s: dataset.window_s,
        provenance: dataset.provenance,
    };
    write_json(&dir.join("header.json"), &header)?;

    let labels: Vec<LabelRecord> = dataset
        .trials
        .iter()
        .map(|t| LabelRecord {
            label: t.label,
            errp_injected: t.errp_injected,
            session_id: t.session_id,
            trial_index: t.trial_index,
        })
        .collect();
    write_json(&dir.join("labels.json"), &labels)?;

    let values = dataset.trials.iter().flat_map(|t| t.data.data().iter().copied());
    write_f32(&dir.join("data.f32"), values)
}

pub fn load_trial_archive(dir: &Path) -> Result<Dataset> {
    let header: ArchiveHeader = read_json(&dir.join("header.json"))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::UnknownFormatVersion(header.format_version));
    }
    if header.n_trials == 0 {
        return Err(Error::EmptyArchive);
    }
    let labels: Vec<LabelRecord> = read_json(&dir.join("labels.json"))?;
    if labels.len() != header.n_trials {
        return Err(Error::Invalid(format!(
            "labels.json has {} rows, header declares {} trials",
            labels.len(),
            header.n_trials
        )));
    }
    let n_channels = header.channel_names.len();
    let per_trial = n_channels * header.n_samples;
    let values = read_f32(&dir.join("data.f32"), header.n_trials * per_trial)?;

    let trials = labels
        .iter()
        .zip(values.chunks_exact(per_trial))
        .map(|(meta, chunk)| {
            let data = Matrix::from_vec(n_channels, header.n_samples, chunk.to_vec())?;
            let trial = Trial {
                data,
                label: meta.label,
                errp_injected: meta.errp_injected,
                subject_id: header.subject_id.clone(),
                session_id: meta.session_id,
                trial_index: meta.trial_index,
                window_s: header.window_s,
                fs_hz: header.fs_hz,
            };
            trial.validate()?;
            Ok(trial)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        subject_id: header.subject_id,
        trials,
        channel_names: header.channel_names,
        fs_hz: header.fs_hz,
        window_s: header.window_s,
        provenance: header.provenance,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(json_err(path))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(json_err(path))
}

/// One compact JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for v in values {
        serde_json::to_writer(&mut out, v).map_err(json_err(path))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Reads a JSON-lines file, skipping blank lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(json_err(path)))
        .collect()
}

pub(crate) fn write_f32(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Reads exactly `count` little-endian floats.
pub(crate) fn read_f32(path: &Path, count: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let expected = count * 4;
    if bytes.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset(n_trials: usize, n_channels: usize, fs: f64, window: (f64, f64)) -> Dataset {
        let n = crate::types::window_len(window, fs);
        let trials = (0..n_trials)
            .map(|i| Trial {
                data: Matrix::from_vec(
                    n_channels,
                    n,
                    (0..n_channels * n).map(|k| (k % 17) as f64 * 0.5 - i as f64).collect(),
                )
                .unwrap(),
                label: Label::from_index(i % 2).unwrap(),
                errp_injected: i % 3 == 0,
                subject_id: "S01".into(),
                session_id: 1 + (i / 4) as u32,
                trial_index: i as u32,
                window_s: window,
                fs_hz: fs,
            })
            .collect();
        Dataset {
            subject_id: "S01".into(),
            trials,
            channel_names: (0..n_channels).map(|c| format!("E{c}")).collect(),
            fs_hz: fs,
            window_s: window,
            provenance: Provenance::Synthetic,
        }
    }

    #[test]
    fn one_trial_three_channels_writes_6000_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset(1, 3, 500.0, (0.0, 1.0));
        save_trial_archive(&ds, dir.path()).unwrap();
        let len = fs::metadata(dir.path().join("data.f32")).unwrap().len();
        assert_eq!(len, 6000);
    }

    #[test]
    fn six_hundred_trials_of_1500_samples() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset(600, 8, 500.0, (-1.0, 2.0));
        save_trial_archive(&ds, dir.path()).unwrap();
        let back = load_trial_archive(dir.path()).unwrap();
        assert_eq!(back.len(), 600);
        assert!(back.trials.iter().all(|t| t.n_samples() == 1500));
        assert_eq!(back, ds);
    }

    #[test]
    fn empty_archive_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset(2, 1, 10.0, (0.0, 1.0));
        save_trial_archive(&ds, dir.path()).unwrap();
        let mut header: ArchiveHeader = read_json(&dir.path().join("header.json")).unwrap();
        header.n_trials = 0;
        write_json(&dir.path().join("header.json"), &header).unwrap();
        let err = load_trial_archive(dir.path()).unwrap_err();
        assert_eq!(err.to_string(), "empty archive");
        assert!(matches!(
            save_trial_archive(&ds.with_trials(vec![]), dir.path()),
            Err(Error::EmptyArchive)
        ));
    }

    #[test]
    fn truncated_data_is_a_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset(2, 2, 10.0, (0.0, 1.0));
        save_trial_archive(&ds, dir.path()).unwrap();
        let path = dir.path().join("data.f32");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        let err = load_trial_archive(dir.path()).unwrap_err();
        assert!(err.to_string().starts_with("size mismatch"), "{err}");
    }

    #[test]
    fn unknown_version_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset(2, 2, 10.0, (0.0, 1.0));
        save_trial_archive(&ds, dir.path()).unwrap();
        let mut header: ArchiveHeader = read_json(&dir.path().join("header.json")).unwrap();
        header.format_version = 7;
        write_json(&dir.path().join("header.json"), &header).unwrap();
        assert!(matches!(
            load_trial_archive(dir.path()),
            Err(Error::UnknownFormatVersion(7))
        ));
        fs::remove_file(dir.path().join("labels.json")).unwrap();
        header.format_version = 1;
        write_json(&dir.path().join("header.json"), &header).unwrap();
        assert!(matches!(load_trial_archive(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn unwritable_location_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        fs::write(&file, b"x").unwrap();
        let ds = tiny_dataset(1, 1, 10.0, (0.0, 1.0));
        assert!(save_trial_archive(&ds, &file.join("nested")).is_err());
    }

    #[test]
    fn resave_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ds = tiny_dataset(5, 2, 100.0, (-0.5, 0.5));
        save_trial_archive(&ds, a.path()).unwrap();
        save_trial_archive(&load_trial_archive(a.path()).unwrap(), b.path()).unwrap();
        for f in ["header.json", "labels.json", "data.f32"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }
}
