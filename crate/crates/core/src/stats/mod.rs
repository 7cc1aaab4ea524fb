//! Nonparametric tests: Wilcoxon signed-rank, pointwise permutation tests and
//! Benjamini-Hochberg false discovery rate control.

mod fdr;
mod permutation;
mod wilcoxon;

use serde::{Deserialize, Serialize};

pub use fdr::{fdr_bh, FdrResult};
pub use permutation::{permutation_test_pointwise, DEFAULT_N_PERM};
pub use wilcoxon::{wilcoxon_signed_rank, EXACT_MAX_N};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    Less,
    Greater,
}

impl std::str::FromStr for Alternative {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "two-sided" => Ok(Self::TwoSided),
            "less" => Ok(Self::Less),
            "greater" => Ok(Self::Greater),
            other => Err(crate::error::invalid(format!("unknown alternative {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub n_effective: usize,
}
