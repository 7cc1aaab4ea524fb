use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrResult {
    pub reject: Vec<bool>,
    pub p_adjusted: Vec<f64>,
}

/// Benjamini-Hochberg step-up procedure at level `q`.
pub fn fdr_bh(p: &[f64], q: f64) -> Result<FdrResult> {
    if p.is_empty() {
        return Err(invalid("fdr_bh needs at least one p-value"));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("p-value {bad} outside [0, 1]")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid(format!("q {q} outside (0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (1..=m).rev() {
        let idx = order[rank - 1];
        running = running.min(p[idx] * m as f64 / rank as f64);
        adjusted[idx] = running;
    }

    // Step-up: largest rank k with p_(k) <= k q / m.
    let k = (1..=m).rev().find(|&k| p[order[k - 1]] <= k as f64 * q / m as f64).unwrap_or(0);
    let mut reject = vec![false; m];
    for &idx in &order[..k] {
        reject[idx] = true;
    }
    Ok(FdrResult {
        reject,
        p_adjusted: adjusted,
    })
}
