//! Small dense helpers: dot products and Cholesky factorization.

use crate::error::{invalid, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            acc[k] += ca[k] * cb[k];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lower Cholesky factor of a symmetric positive-definite `n x n` row-major matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            if i == j {
                if s <= 0.0 {
                    return Err(invalid("matrix is not positive definite"));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let l = cholesky(a, n)?;
    // Invert L column by column, then form L^-T L^-1.
    let mut linv = vec![0.0; n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[i * n + k] * linv[k * n + col];
            }
            linv[i * n + col] = s / l[i * n + i];
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let start = i.max(j);
            let s: f64 = (start..n).map(|k| linv[k * n + i] * linv[k * n + j]).sum();
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Ok(inv)
}

/// Lower-triangular factor stored row by row (row `i` holds `i + 1` entries),
/// grown one row at a time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowingCholesky {
    rows: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Solves `L y = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        for i in 0..self.rows.len() {
            let row = &self.rows[i];
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `L^T y = b` in place.
    pub fn backward_solve(&self, b: &mut [f64]) {
        for i in (0..self.rows.len()).rev() {
            let yi = b[i] / self.rows[i][i];
            b[i] = yi;
            for (k, bk) in b[..i].iter_mut().enumerate() {
                *bk -= self.rows[i][k] * yi;
            }
        }
    }

    /// Appends the row/column `(cross, diag)` to the factored matrix, where
    /// `cross` holds the new off-diagonal entries.
    pub fn push(&mut self, cross: &[f64], diag: f64) -> Result<()> {
        let mut l = cross.to_vec();
        self.forward_solve(&mut l);
        let d = diag - dot(&l, &l);
        if d <= 0.0 {
            return Err(invalid("matrix lost positive definiteness"));
        }
        l.push(d.sqrt());
        self.rows.push(l);
        Ok(())
    }
}
