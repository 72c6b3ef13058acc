use serde::{Deserialize, Serialize};

use super::{check_finite, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianIqr {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Type-7 quantile of an ascending slice: linear interpolation between
/// order statistics at position `(n - 1) * p`.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn median_iqr(values: &[f64]) -> Result<MedianIqr, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(MedianIqr {
        median: sorted_median(&sorted),
        q1: quantile_type7(&sorted, 0.25),
        q3: quantile_type7(&sorted, 0.75),
    })
}

/// System Usability Scale score (0..=100) from ten 1..=5 items. Odd items
/// contribute `x - 1`, even items `5 - x`; the sum is scaled by 2.5.
pub fn sus_score(items: &[u8]) -> Result<f64, StatsError> {
    if items.len() != 10 {
        return Err(StatsError::SusItemCount(items.len()));
    }
    let mut sum = 0u32;
    for (i, &x) in items.iter().enumerate() {
        if !(1..=5).contains(&x) {
            return Err(StatsError::SusItemRange { item: i + 1, value: x });
        }
        sum += u32::from(if i % 2 == 0 { x - 1 } else { 5 - x });
    }
    Ok(f64::from(sum) * 2.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusSummary {
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for one respondent.
    pub sd: f64,
}

pub fn sus_summary(responses: &[Vec<u8>]) -> Result<SusSummary, StatsError> {
    if responses.is_empty() {
        return Err(StatsError::Empty);
    }
    let scores = responses
        .iter()
        .map(|r| sus_score(r))
        .collect::<Result<Vec<_>, _>>()?;
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let sd = if scores.len() > 1 {
        (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SusSummary { scores, mean, sd })
}
