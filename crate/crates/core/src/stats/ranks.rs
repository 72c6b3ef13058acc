/// Average ranks (1-based) with ties sharing the mean of their positions.
///
/// Input must be finite.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    doubled_midranks(values)
        .0
        .into_iter()
        .map(|r| r as f64 / 2.0)
        .collect()
}

/// Twice the mid-ranks, which are always integers, plus the tie group sizes.
pub(crate) fn doubled_midranks(values: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0usize; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j, doubled mean = i + 1 + j
        for &idx in &order[i..j] {
            ranks[idx] = i + 1 + j;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Sum over tie groups of `t^3 - t`.
pub(crate) fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}
