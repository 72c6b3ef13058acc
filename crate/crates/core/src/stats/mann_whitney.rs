use super::ranks::{doubled_midranks, tie_term};
use super::{check_finite, combine_tails, exact_tails, normal_p, StatsError, Tail, TestMethod, TestResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitneyOptions {
    pub exact_max_min: usize,
    pub exact_max_total: usize,
}

impl Default for MannWhitneyOptions {
    fn default() -> Self {
        Self {
            exact_max_min: 8,
            exact_max_total: 16,
        }
    }
}

/// Rank-sum test of `a` against `b`. The statistic is U of `a`;
/// `Tail::Greater` tests whether `a` tends to be larger.
pub fn mann_whitney_u(a: &[f64], b: &[f64], tail: Tail) -> Result<TestResult, StatsError> {
    mann_whitney_u_with(a, b, tail, &MannWhitneyOptions::default())
}

pub fn mann_whitney_u_with(
    a: &[f64],
    b: &[f64],
    tail: Tail,
    opts: &MannWhitneyOptions,
) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(a)?;
    check_finite(b)?;
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks2, ties) = doubled_midranks(&pooled);
    let r2_a: usize = ranks2[..n].iter().sum();
    let u2 = r2_a - n * (n + 1);
    let statistic = u2 as f64 / 2.0;

    if n.min(m) <= opts.exact_max_min && n + m <= opts.exact_max_total.min(120) {
        let counts = subset_sum_distribution(&ranks2, n);
        let (le, ge) = exact_tails(&counts, r2_a);
        return Ok(TestResult {
            statistic,
            p: combine_tails(tail, le, ge),
            p_adjusted: None,
            tail,
            method: TestMethod::Exact,
            n_effective: n + m,
        });
    }

    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let mean = nf * mf / 2.0;
    let var = nf * mf / 12.0 * ((total + 1.0) - tie_term(&ties) / (total * (total - 1.0)));
    Ok(TestResult {
        statistic,
        p: normal_p(statistic, mean, var, tail),
        p_adjusted: None,
        tail,
        method: TestMethod::NormalApprox,
        n_effective: n + m,
    })
}

/// `counts[s]`: number of size-`k` subsets of the pooled doubled ranks summing to `s`.
fn subset_sum_distribution(ranks2: &[usize], k: usize) -> Vec<u128> {
    let max: usize = ranks2.iter().sum();
    let mut dp = vec![vec![0u128; max + 1]; k + 1];
    dp[0][0] = 1;
    for (i, &r) in ranks2.iter().enumerate() {
        for size in (1..=k.min(i + 1)).rev() {
            let (lower, upper) = dp.split_at_mut(size);
            let prev = &lower[size - 1];
            let cur = &mut upper[0];
            for s in (r..=max).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    dp.swap_remove(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_separated() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Tail::TwoSided).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_separated() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], Tail::TwoSided).unwrap();
        assert!((r.p - 0.1).abs() < 1e-15);
        let less = mann_whitney_u(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], Tail::Less).unwrap();
        assert!((less.p - 0.05).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let r = mann_whitney_u(&[1.0, 1.0, 1.0], &[1.0, 1.0], Tail::TwoSided).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(r.statistic, 3.0);
    }

    #[test]
    fn large_groups_use_normal() {
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (5..15).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b, Tail::TwoSided).unwrap();
        assert_eq!(r.method, TestMethod::NormalApprox);
        assert!(r.p > 0.0 && r.p < 0.1);
    }

    #[test]
    fn empty_group_is_an_error() {
        assert_eq!(mann_whitney_u(&[], &[1.0], Tail::Less), Err(StatsError::Empty));
    }
}
