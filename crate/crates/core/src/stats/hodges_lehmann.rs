use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::descriptive::{quantile_type7, sorted_median};
use super::wilcoxon::signed_rank_distribution;
use super::{check_finite, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    BootstrapPercentile,
    /// Inversion of the untied signed-rank distribution over Walsh averages.
    WalshExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HlEstimator {
    /// Median of the Walsh averages.
    Walsh,
    /// Plain sample median of the differences.
    LiteralMedian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlOptions {
    pub level: f64,
    pub ci: CiMethod,
    pub estimator: HlEstimator,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for HlOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            ci: CiMethod::BootstrapPercentile,
            estimator: HlEstimator::Walsh,
            resamples: 10_000,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub method: CiMethod,
    pub n: usize,
}

/// Point estimate plus confidence interval for the location of `diffs`.
///
/// Bootstrap resample `b` draws from `ChaCha8Rng` seeded with `opts.seed` on
/// stream `b`, so results do not depend on evaluation order. The percentile
/// interval is widened if necessary to contain the point estimate.
pub fn hodges_lehmann(diffs: &[f64], opts: &HlOptions) -> Result<EstimateWithCI, StatsError> {
    if diffs.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(diffs)?;
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(StatsError::InvalidLevel(opts.level));
    }
    let estimate = estimate(diffs, opts.estimator);
    let alpha = 1.0 - opts.level;
    let (lo, hi) = match opts.ci {
        CiMethod::BootstrapPercentile => {
            let n = diffs.len();
            let mut stats = Vec::with_capacity(opts.resamples);
            let mut sample = vec![0.0; n];
            for b in 0..opts.resamples {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(b as u64);
                for slot in sample.iter_mut() {
                    *slot = diffs[rng.random_range(0..n)];
                }
                stats.push(estimate_of(&sample, opts.estimator));
            }
            if stats.is_empty() {
                (estimate, estimate)
            } else {
                stats.sort_by(f64::total_cmp);
                (
                    quantile_type7(&stats, alpha / 2.0),
                    quantile_type7(&stats, 1.0 - alpha / 2.0),
                )
            }
        }
        CiMethod::WalshExact => walsh_exact_ci(diffs, alpha),
    };
    Ok(EstimateWithCI {
        estimate,
        ci_low: lo.min(estimate),
        ci_high: hi.max(estimate),
        level: opts.level,
        method: opts.ci,
        n: diffs.len(),
    })
}

/// Median of all pairwise averages `(x_i + x_j) / 2`, `i <= j`.
pub fn hodges_lehmann_point(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(walsh_median(&sorted))
}

fn estimate(values: &[f64], estimator: HlEstimator) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    match estimator {
        HlEstimator::Walsh => walsh_median(&sorted),
        HlEstimator::LiteralMedian => sorted_median(&sorted),
    }
}

fn estimate_of(sample: &[f64], estimator: HlEstimator) -> f64 {
    estimate(sample, estimator)
}

fn walsh_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let total = n * (n + 1) / 2;
    if total % 2 == 1 {
        kth_pair_sum(sorted, total / 2) / 2.0
    } else {
        (kth_pair_sum(sorted, total / 2 - 1) / 2.0 + kth_pair_sum(sorted, total / 2) / 2.0) / 2.0
    }
}

/// The `k`-th smallest (0-based) Walsh average of `values`.
pub fn kth_walsh_average(values: &[f64], k: usize) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(values)?;
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(kth_pair_sum(&sorted, k.min(n * (n + 1) / 2 - 1)) / 2.0)
}

fn walsh_exact_ci(diffs: &[f64], alpha: f64) -> (f64, f64) {
    let n = diffs.len();
    let total = n * (n + 1) / 2;
    let ranks: Vec<usize> = (1..=n).collect();
    let counts = signed_rank_distribution(&ranks);
    let all: u128 = counts.iter().sum();
    // largest c with P(W <= c - 1) <= alpha / 2
    let mut c = 0usize;
    let mut cum = 0u128;
    while c < counts.len() {
        let next = cum + counts[c];
        if next as f64 / all as f64 > alpha / 2.0 {
            break;
        }
        cum = next;
        c += 1;
    }
    let c = c.clamp(1, total.div_ceil(2));
    let mut sorted = diffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    (
        kth_pair_sum(&sorted, c - 1) / 2.0,
        kth_pair_sum(&sorted, total - c) / 2.0,
    )
}

/// Selection over the implicit upper-triangular matrix of pair sums
/// `s[i] + s[j]` (`i <= j`), whose rows and columns are sorted. Each round
/// picks a pivot among still-active cells, counts cells below and at the
/// pivot with a two-pointer sweep, then shrinks every row's active range.
fn kth_pair_sum(sorted: &[f64], k: usize) -> f64 {
    let n = sorted.len();
    let mut left: Vec<usize> = (0..n).collect();
    let mut right: Vec<usize> = vec![n; n];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    loop {
        let active: usize = (0..n).map(|i| right[i] - left[i]).sum();
        debug_assert!(active > 0);
        let mut pick = rng.random_range(0..active);
        let mut pivot = f64::NAN;
        for i in 0..n {
            let width = right[i] - left[i];
            if pick < width {
                pivot = sorted[i] + sorted[left[i] + pick];
                break;
            }
            pick -= width;
        }

        let below = count_pairs(sorted, |s| s < pivot);
        let at_or_below = count_pairs(sorted, |s| s <= pivot);
        if k >= below && k < at_or_below {
            return pivot;
        }
        for i in 0..n {
            if k < below {
                // keep cells strictly below the pivot
                while right[i] > left[i] && sorted[i] + sorted[right[i] - 1] >= pivot {
                    right[i] -= 1;
                }
            } else {
                while left[i] < right[i] && sorted[i] + sorted[left[i]] <= pivot {
                    left[i] += 1;
                }
            }
        }
    }
}

/// Number of pairs `i <= j` whose sum satisfies the monotone predicate.
fn count_pairs(sorted: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    let n = sorted.len();
    let mut count = 0;
    // j_end: first column failing pred for the current row; non-increasing in i
    let mut j_end = n;
    for i in 0..n {
        while j_end > 0 && !pred(sorted[i] + sorted[j_end - 1]) {
            j_end -= 1;
        }
        if j_end <= i {
            break;
        }
        count += j_end - i;
    }
    count
}
