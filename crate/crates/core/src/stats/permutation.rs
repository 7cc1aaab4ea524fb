use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::types::Matrix;

pub const DEFAULT_N_PERM: usize = 800;

/// Pointwise label-permutation test of `|mean_a - mean_b|` for two
/// trials-by-points matrices. Every permutation is shared across points.
/// `p = (1 + #{permuted >= observed}) / (n_perm + 1)`.
pub fn permutation_test_pointwise<R: Rng + ?Sized>(
    cond_a: &Matrix,
    cond_b: &Matrix,
    n_perm: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_perm == 0 {
        return Err(invalid("n_perm must be positive"));
    }
    if cond_a.rows() == 0 {
        return Err(Error::EmptyPartition("condition a"));
    }
    if cond_b.rows() == 0 {
        return Err(Error::EmptyPartition("condition b"));
    }
    if cond_a.rows() < 2 || cond_b.rows() < 2 {
        return Err(invalid("each condition needs at least 2 trials"));
    }
    if cond_a.cols() != cond_b.cols() {
        return Err(Error::DimensionMismatch {
            expected: cond_a.cols(),
            got: cond_b.cols(),
        });
    }
    let n_points = cond_a.cols();
    let (na, nb) = (cond_a.rows(), cond_b.rows());
    let pooled: Vec<&[f64]> = (0..na).map(|r| cond_a.row(r)).chain((0..nb).map(|r| cond_b.row(r))).collect();

    let mut total = vec![0.0; n_points];
    for row in &pooled {
        for (t, v) in total.iter_mut().zip(row.iter()) {
            *t += v;
        }
    }
    let stat = |sum_a: &[f64], out: &mut [f64]| {
        for ((o, sa), t) in out.iter_mut().zip(sum_a).zip(&total) {
            *o = (sa / na as f64 - (t - sa) / nb as f64).abs();
        }
    };

    let mut sum_a = vec![0.0; n_points];
    for row in &pooled[..na] {
        for (s, v) in sum_a.iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    let mut observed = vec![0.0; n_points];
    stat(&sum_a, &mut observed);

    let mut exceed = vec![0usize; n_points];
    let mut order: Vec<usize> = (0..na + nb).collect();
    let mut permuted = vec![0.0; n_points];
    for _ in 0..n_perm {
        order.shuffle(rng);
        sum_a.iter_mut().for_each(|s| *s = 0.0);
        for &i in &order[..na] {
            for (s, v) in sum_a.iter_mut().zip(pooled[i].iter()) {
                *s += v;
            }
        }
        stat(&sum_a, &mut permuted);
        for ((e, p), o) in exceed.iter_mut().zip(&permuted).zip(&observed) {
            // Relative slack so that a permutation reproducing the observed
            // split is not lost to summation-order rounding.
            if *p >= *o - 1e-12 * o.abs().max(1e-300) {
                *e += 1;
            }
        }
    }
    Ok(exceed.iter().map(|&e| (1 + e) as f64 / (n_perm + 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noise(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let n = Normal::new(0.0, 1.0).unwrap();
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| n.sample(rng)).collect()).unwrap()
    }

    #[test]
    fn null_p_values_are_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let all = noise(200, 50, &mut rng);
        let a = all.slice_rows(0, 100);
        let b = all.slice_rows(100, 200);
        let p = permutation_test_pointwise(&a, &b, 800, &mut rng).unwrap();
        let frac = p.iter().filter(|v| **v < 0.05).count() as f64 / p.len() as f64;
        assert!(frac <= 0.12, "{frac}");
        assert!(p.iter().all(|v| *v >= 1.0 / 801.0 && *v <= 1.0));
    }

    #[test]
    fn large_shift_gives_minimum_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = noise(30, 20, &mut rng);
        let mut b = noise(30, 20, &mut rng);
        b.data_mut().iter_mut().for_each(|v| *v += 100.0);
        let p = permutation_test_pointwise(&a, &b, 800, &mut rng).unwrap();
        assert!(p.iter().all(|v| (*v - 1.0 / 801.0).abs() < 1e-15));
    }

    #[test]
    fn invalid_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = noise(5, 4, &mut rng);
        let b = noise(5, 4, &mut rng);
        assert!(permutation_test_pointwise(&a, &b, 0, &mut rng).is_err());
        let empty = Matrix::zeros(0, 4);
        assert!(permutation_test_pointwise(&a, &empty, 10, &mut rng).is_err());
        let narrow = noise(5, 3, &mut rng);
        assert!(permutation_test_pointwise(&a, &narrow, 10, &mut rng).is_err());
    }
}
