use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::baseline_correct;
use crate::error::{invalid, Error, Result};
use crate::stats::{fdr_bh, permutation_test_pointwise, FdrResult};
use crate::types::{Label, Matrix, Trial};

/// Baseline interval for ERP averaging, in seconds.
pub const ERP_BASELINE_S: (f64, f64) = (-0.2, 0.0);

/// Which trials enter an average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    All,
    Error,
    Correct,
    Left,
    Right,
}

impl Condition {
    pub fn matches(self, trial: &Trial) -> bool {
        match self {
            Condition::All => true,
            Condition::Error => trial.errp_injected,
            Condition::Correct => !trial.errp_injected,
            Condition::Left => trial.label == Label::Left,
            Condition::Right => trial.label == Label::Right,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Condition::All => "all",
            Condition::Error => "error",
            Condition::Correct => "correct",
            Condition::Left => "left",
            Condition::Right => "right",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Condition::All,
            "error" => Condition::Error,
            "correct" => Condition::Correct,
            "left" => Condition::Left,
            "right" => Condition::Right,
            other => return Err(invalid(format!("unknown condition {other}"))),
        })
    }
}

/// Trial-averaged waveform, channels x time in microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpWave {
    pub values: Matrix,
    pub times_s: Vec<f64>,
    pub n_trials: usize,
    pub condition: String,
}

/// Baseline-corrects every trial over `baseline_s`.
pub fn baseline_corrected(trials: &[Trial], baseline_s: (f64, f64)) -> Result<Vec<Trial>> {
    trials.iter().map(|t| baseline_correct(t, baseline_s)).collect()
}

/// Pointwise mean of the trials matching `condition`. Trials are expected to
/// be baseline-corrected already.
pub fn erp_average(trials: &[Trial], condition: Condition) -> Result<ErpWave> {
    let selected: Vec<&Trial> = trials.iter().filter(|t| condition.matches(t)).collect();
    let first = selected.first().ok_or(Error::EmptyPartition("no trials match the condition"))?;
    let (rows, cols) = (first.data.rows(), first.data.cols());
    let mut values = Matrix::zeros(rows, cols);
    for t in &selected {
        if t.data.rows() != rows || t.data.cols() != cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: t.data.rows() * t.data.cols(),
            });
        }
        for (acc, v) in values.data_mut().iter_mut().zip(t.data.data()) {
            *acc += v;
        }
    }
    let n = selected.len() as f64;
    values.data_mut().iter_mut().for_each(|v| *v /= n);
    Ok(ErpWave {
        values,
        times_s: first.times(),
        n_trials: selected.len(),
        condition: condition.tag().into(),
    })
}

/// Pointwise `error - correct`.
pub fn difference_wave(error: &ErpWave, correct: &ErpWave) -> Result<ErpWave> {
    let aligned = error.times_s.len() == correct.times_s.len()
        && error.times_s.iter().zip(&correct.times_s).all(|(a, b)| (a - b).abs() < 1e-9)
        && error.values.rows() == correct.values.rows();
    if !aligned {
        return Err(invalid("ERP time axes or channel counts differ"));
    }
    let data = error
        .values
        .data()
        .iter()
        .zip(correct.values.data())
        .map(|(a, b)| a - b)
        .collect();
    Ok(ErpWave {
        values: Matrix::from_vec(error.values.rows(), error.values.cols(), data)?,
        times_s: error.times_s.clone(),
        n_trials: error.n_trials + correct.n_trials,
        condition: format!("{}-{}", error.condition, correct.condition),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub time_s: f64,
    pub value: f64,
}

/// Up to `count` local extrema inside `interval_s`, chosen by decreasing
/// magnitude with at least `min_separation_s` between picks, returned in
/// time order.
pub fn prominent_extrema(
    values: &[f64],
    times_s: &[f64],
    interval_s: (f64, f64),
    count: usize,
    min_separation_s: f64,
) -> Vec<Extremum> {
    let n = values.len().min(times_s.len());
    let mut candidates: Vec<Extremum> = (1..n.saturating_sub(1))
        .filter(|&i| times_s[i] >= interval_s.0 && times_s[i] <= interval_s.1)
        .filter(|&i| {
            let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
            (b >= a && b > c) || (b <= a && b < c)
        })
        .map(|i| Extremum {
            time_s: times_s[i],
            value: values[i],
        })
        .collect();
    candidates.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
    let mut picked: Vec<Extremum> = Vec::with_capacity(count);
    for c in candidates {
        if picked.len() == count {
            break;
        }
        if picked.iter().all(|p| (p.time_s - c.time_s).abs() >= min_separation_s) {
            picked.push(c);
        }
    }
    picked.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    picked
}

/// Pointwise permutation test of error against correct trials on one
/// channel, followed by BH-FDR at `q` over all time points.
pub fn erp_significance<R: Rng + ?Sized>(
    trials: &[Trial],
    channel: usize,
    n_perm: usize,
    q: f64,
    rng: &mut R,
) -> Result<FdrResult> {
    let rows = |cond: Condition| -> Result<Matrix> {
        let picked: Vec<Vec<f64>> = trials
            .iter()
            .filter(|t| cond.matches(t))
            .map(|t| {
                if channel >= t.n_channels() {
                    Err(invalid(format!("channel {channel} out of range")))
                } else {
                    Ok(t.data.row(channel).to_vec())
                }
            })
            .collect::<Result<_>>()?;
        if picked.is_empty() {
            return Ok(Matrix::zeros(0, 0));
        }
        Matrix::from_rows(&picked)
    };
    let p = permutation_test_pointwise(&rows(Condition::Error)?, &rows(Condition::Correct)?, n_perm, rng)?;
    fdr_bh(&p, q)
}
