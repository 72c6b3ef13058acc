//! Nonparametric tests, estimators and descriptive statistics.
//!
//! * [`wilcoxon_signed_rank`]: paired test, exact for up to 25 nonzero
//!   differences (tie-aware mid-rank distribution), normal approximation with
//!   continuity and tie correction above that.
//! * [`mann_whitney_u`]: two-sample test, exact when `min(n, m) <= 8` and
//!   `n + m <= 16`.
//! * [`holm_adjust`]: Holm step-down family-wise correction.
//! * [`hodges_lehmann`]: median of Walsh averages with a bootstrap percentile
//!   or Wilcoxon-inversion confidence interval.
//! * [`median_iqr`]: type-7 (linear interpolation) quantiles.
//! * [`sus_score`]: System Usability Scale scoring.

mod descriptive;
mod hodges_lehmann;
mod holm;
mod mann_whitney;
mod ranks;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use descriptive::{median_iqr, quantile_type7, sus_score, sus_summary, MedianIqr, SusSummary};
pub use hodges_lehmann::{
    hodges_lehmann, hodges_lehmann_point, kth_walsh_average, CiMethod, EstimateWithCI,
    HlEstimator, HlOptions,
};
pub use holm::holm_adjust;
pub use mann_whitney::{mann_whitney_u, mann_whitney_u_with, MannWhitneyOptions};
pub use ranks::midranks;
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, WilcoxonOptions};

/// Alternative hypothesis direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Location shift below zero (paired) or first sample smaller.
    Less,
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// W+ for the signed-rank test, U of the first sample for Mann-Whitney.
    pub statistic: f64,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_adjusted: Option<f64>,
    pub tail: Tail,
    pub method: TestMethod,
    pub n_effective: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("all paired differences are zero")]
    AllZero,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("p-value {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("SUS response needs 10 items, got {0}")]
    SusItemCount(usize),
    #[error("SUS item {item} = {value} outside 1..=5")]
    SusItemRange { item: usize, value: u8 },
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Upper-tail and lower-tail p from an exact distribution over integer
/// statistic values `0..counts.len()`.
fn exact_tails(counts: &[u128], observed: usize) -> (f64, f64) {
    let total: u128 = counts.iter().sum();
    let le: u128 = counts[..=observed.min(counts.len() - 1)].iter().sum();
    let ge: u128 = counts[observed.min(counts.len())..].iter().sum();
    (le as f64 / total as f64, ge as f64 / total as f64)
}

fn combine_tails(tail: Tail, p_le: f64, p_ge: f64) -> f64 {
    let p = match tail {
        Tail::Less => p_le,
        Tail::Greater => p_ge,
        Tail::TwoSided => 2.0 * p_le.min(p_ge),
    };
    p.clamp(0.0, 1.0)
}

/// Normal approximation with continuity correction.
fn normal_p(statistic: f64, mean: f64, var: f64, tail: Tail) -> f64 {
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let p = match tail {
        Tail::Greater => std_normal.sf((statistic - mean - 0.5) / sd),
        Tail::Less => std_normal.cdf((statistic - mean + 0.5) / sd),
        Tail::TwoSided => {
            let z = ((statistic - mean).abs() - 0.5).max(0.0) / sd;
            2.0 * std_normal.sf(z)
        }
    };
    p.clamp(0.0, 1.0)
}
