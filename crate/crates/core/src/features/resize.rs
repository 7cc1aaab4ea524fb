//! Cubic-convolution resampling of small matrices.

use crate::error::{invalid, Result};
use crate::types::Matrix;

/// Keys cubic-convolution kernel parameter.
pub const CUBIC_A: f64 = -0.5;

pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Four (index, weight) pairs per output position along one axis, with
/// half-pixel-centre coordinate mapping and clamp-to-edge indexing.
fn axis_weights(n_in: usize, n_out: usize) -> Vec<[(usize, f64); 4]> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut taps = [(0usize, 0.0f64); 4];
            for (k, tap) in taps.iter_mut().enumerate() {
                let offset = k as f64 - 1.0;
                let idx = (base + offset).clamp(0.0, (n_in - 1) as f64) as usize;
                *tap = (idx, cubic_kernel(frac - offset));
            }
            taps
        })
        .collect()
}

pub fn resize_bicubic(m: &Matrix, out_rows: usize, out_cols: usize) -> Result<Matrix> {
    if m.rows() < 2 || m.cols() < 2 {
        return Err(invalid(format!(
            "input {}x{} smaller than 2x2",
            m.rows(),
            m.cols()
        )));
    }
    if out_rows == 0 || out_cols == 0 {
        return Err(invalid("empty output shape"));
    }
    let col_w = axis_weights(m.cols(), out_cols);
    let row_w = axis_weights(m.rows(), out_rows);

    let mut horizontal = Matrix::zeros(m.rows(), out_cols);
    for r in 0..m.rows() {
        let src = m.row(r);
        for (c, taps) in col_w.iter().enumerate() {
            let v = taps.iter().map(|&(i, w)| src[i] * w).sum();
            horizontal.set(r, c, v);
        }
    }
    let mut out = Matrix::zeros(out_rows, out_cols);
    for (r, taps) in row_w.iter().enumerate() {
        for c in 0..out_cols {
            let v = taps.iter().map(|&(i, w)| horizontal.get(i, c) * w).sum();
            out.set(r, c, v);
        }
    }
    Ok(out)
}
