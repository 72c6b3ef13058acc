use super::ranks::{doubled_midranks, tie_term};
use super::{check_finite, combine_tails, exact_tails, normal_p, StatsError, Tail, TestMethod, TestResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonOptions {
    /// Largest number of nonzero differences handled by the exact distribution.
    pub exact_max_n: usize,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        Self { exact_max_n: 25 }
    }
}

/// Signed-rank test on paired differences (e.g. `pre - post`). Zero
/// differences are dropped. `Tail::Greater` tests for a positive shift.
pub fn wilcoxon_signed_rank(diffs: &[f64], tail: Tail) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_with(diffs, tail, &WilcoxonOptions::default())
}

pub fn wilcoxon_signed_rank_with(
    diffs: &[f64],
    tail: Tail,
    opts: &WilcoxonOptions,
) -> Result<TestResult, StatsError> {
    if diffs.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(diffs)?;
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(StatsError::AllZero);
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks2, ties) = doubled_midranks(&abs);
    let w2: usize = ranks2
        .iter()
        .zip(&nonzero)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| *r)
        .sum();
    let statistic = w2 as f64 / 2.0;

    if n <= opts.exact_max_n.min(120) {
        let counts = signed_rank_distribution(&ranks2);
        let (le, ge) = exact_tails(&counts, w2);
        return Ok(TestResult {
            statistic,
            p: combine_tails(tail, le, ge),
            p_adjusted: None,
            tail,
            method: TestMethod::Exact,
            n_effective: n,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    Ok(TestResult {
        statistic,
        p: normal_p(statistic, mean, var, tail),
        p_adjusted: None,
        tail,
        method: TestMethod::NormalApprox,
        n_effective: n,
    })
}

/// Null distribution of the doubled positive-rank sum: `counts[s]` is the
/// number of sign assignments giving doubled sum `s`.
pub(crate) fn signed_rank_distribution(ranks2: &[usize]) -> Vec<u128> {
    let max: usize = ranks2.iter().sum();
    let mut counts = vec![0u128; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in ranks2 {
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_positive_differences_one_sided() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], Tail::Greater).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!((r.p - 0.125).abs() < 1e-15);
        assert_eq!(r.method, TestMethod::Exact);
    }

    #[test]
    fn symmetric_pair_two_sided_is_one() {
        let r = wilcoxon_signed_rank(&[5.0, -5.0], Tail::TwoSided).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn zeros_are_dropped() {
        let r = wilcoxon_signed_rank(&[0.0, 1.0, 2.0, 0.0, 3.0], Tail::Greater).unwrap();
        assert_eq!(r.n_effective, 3);
        assert!((r.p - 0.125).abs() < 1e-15);
    }

    #[test]
    fn all_zero_is_an_error() {
        assert_eq!(wilcoxon_signed_rank(&[0.0, 0.0], Tail::Greater), Err(StatsError::AllZero));
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let d: Vec<f64> = (1..=30).map(f64::from).collect();
        let r = wilcoxon_signed_rank(&d, Tail::Greater).unwrap();
        assert_eq!(r.method, TestMethod::NormalApprox);
        assert!(r.p < 1e-5);
    }

    #[test]
    fn exact_and_normal_agree_near_cutoff() {
        let d: Vec<f64> = (1..=25).map(|i| if i % 3 == 0 { -f64::from(i) } else { f64::from(i) }).collect();
        let exact = wilcoxon_signed_rank(&d, Tail::TwoSided).unwrap();
        let approx =
            wilcoxon_signed_rank_with(&d, Tail::TwoSided, &WilcoxonOptions { exact_max_n: 0 }).unwrap();
        assert!((exact.p - approx.p).abs() < 0.01, "{} vs {}", exact.p, approx.p);
    }
}
