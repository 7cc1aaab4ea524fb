use statrs::distribution::{ContinuousCDF, Normal};

use super::{Alternative, Method, TestResult};
use crate::error::{invalid, Error, Result};

/// Largest number of non-zero differences handled by the exact distribution.
pub const EXACT_MAX_N: usize = 25;

/// Wilcoxon signed-rank test on paired samples; the statistic is the sum of
/// ranks of positive differences `x - y`. `Greater` tests whether `x` tends
/// to exceed `y`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired samples"));
    }
    let nonzero: Vec<f64> = diffs.into_iter().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let n = nonzero.len();
    let (ranks, tie_sizes) = average_ranks(&nonzero);
    let w_plus: f64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let (p, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus, alternative), Method::Exact)
    } else {
        (normal_p(n, &tie_sizes, w_plus, alternative), Method::NormalApprox)
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value: p.clamp(0.0, 1.0),
        method,
        n_effective: n,
    })
}

/// Average ranks of `|d|` (1-based) and the sizes of tie groups.
fn average_ranks(d: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Exact null distribution over all sign assignments. Average ranks are
/// multiples of 1/2, so doubled ranks are integers and the distribution is a
/// subset-sum count.
fn exact_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all = 2f64.powi(ranks.len() as i32);
    let obs = (w_plus * 2.0).round() as usize;
    let upper = counts[obs..].iter().sum::<f64>() / all;
    let lower = counts[..=obs].iter().sum::<f64>() / all;
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

fn normal_p(n: usize, tie_sizes: &[usize], w_plus: f64, alternative: Alternative) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let upper = 1.0 - std_normal.cdf((w_plus - mean - 0.5) / sd);
    let lower = std_normal.cdf((w_plus - mean + 0.5) / sd);
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_positive_differences() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0; 5];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Greater).unwrap();
        assert_eq!(r.p_value, 0.03125);
        assert_eq!(r.statistic, 15.0);
        assert_eq!(r.method, Method::Exact);
        let r = wilcoxon_signed_rank(&x, &y, Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 0.0625);
    }

    #[test]
    fn nine_consistent_subjects() {
        let first = [12.0, 15.0, 9.0, 20.0, 11.0, 14.0, 17.0, 8.0, 13.0];
        let second = [5.0, 6.0, 4.0, 7.0, 3.0, 8.0, 6.0, 2.0, 5.0];
        let r = wilcoxon_signed_rank(&second, &first, Alternative::Less).unwrap();
        assert!((r.p_value - 1.0 / 512.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_two_sided() {
        let x = [1.3, 2.0, -0.4, 5.0, 2.2, 0.9, -1.1];
        let y = [0.3, 2.5, 0.4, 1.0, 2.0, 0.1, 0.0];
        let a = wilcoxon_signed_rank(&x, &y, Alternative::TwoSided).unwrap();
        let b = wilcoxon_signed_rank(&y, &x, Alternative::TwoSided).unwrap();
        assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn ties_and_zeros() {
        let x = [1.0, 1.0, 2.0, 0.0, -1.0, 3.0];
        let y = [0.0; 6];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Greater).unwrap();
        assert_eq!(r.n_effective, 5);
        // |d| = 1,1,2,1,3 -> ranks 2,2,4,2,5; positives sum to 13.
        assert_eq!(r.statistic, 13.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0], Alternative::TwoSided),
            Err(Error::AllZeroDifferences)
        ));
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + 0.3).collect();
        let y = vec![0.0; 40];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Greater).unwrap();
        assert_eq!(r.method, Method::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value < 0.05);
    }

    #[test]
    fn normal_approximation_is_close_to_exact_near_threshold() {
        let d: Vec<f64> = (1..=25).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let y = vec![0.0; 25];
        let exact = wilcoxon_signed_rank(&d, &y, Alternative::Greater).unwrap();
        let (ranks, ties) = average_ranks(&d);
        let approx = normal_p(25, &ties, exact.statistic, Alternative::Greater);
        assert_eq!(ranks.len(), 25);
        assert!((exact.p_value - approx).abs() < 0.01);
    }
}
