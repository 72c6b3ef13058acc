use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{class_index, PausenetError, CLASSES};
use crate::dsp::{FeatureWindow, FEATURE_DIM};
use crate::Warning;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteResult {
    /// The input windows unchanged, followed by the synthetic ones.
    pub windows: Vec<FeatureWindow>,
    pub n_synthetic: usize,
    pub k_used: usize,
    /// Input indices of the (base, neighbour) pair behind each synthetic window.
    pub origins: Vec<(usize, usize)>,
    pub warnings: Vec<Warning>,
}

/// Oversamples the minority class up to the majority count.
///
/// Synthetic window `s` interpolates minority member `s mod m` towards one of
/// its `k` nearest same-class neighbours (Euclidean on raw features, ties by
/// index), chosen uniformly, at a uniform position in `[0, 1)`.
pub fn smote(train: &[FeatureWindow], k: usize, seed: u64) -> Result<SmoteResult, PausenetError> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, w) in train.iter().enumerate() {
        let label = w.label.ok_or(PausenetError::Unlabeled(w.start_t))?;
        by_class[class_index(label)].push(i);
    }
    let mut result = SmoteResult {
        windows: train.to_vec(),
        n_synthetic: 0,
        k_used: k,
        origins: Vec::new(),
        warnings: Vec::new(),
    };
    let (minority, majority) = if by_class[0].len() < by_class[1].len() { (0, 1) } else { (1, 0) };
    let needed = by_class[majority].len() - by_class[minority].len();
    if needed == 0 {
        return Ok(result);
    }
    let members = &by_class[minority];
    if members.len() < 2 {
        return Err(PausenetError::ClassTooSmall {
            class: CLASSES[minority],
            count: members.len(),
            needed: 2,
        });
    }
    if k == 0 {
        return Err(PausenetError::InvalidParam("SMOTE k must be at least 1".into()));
    }
    let k_used = k.min(members.len() - 1);
    if k_used < k {
        result.warnings.push(Warning::new(
            "smote_k",
            format!(
                "minority class has {} members; k reduced from {k} to {k_used}",
                members.len()
            ),
        ));
    }
    result.k_used = k_used;

    let neighbours: Vec<Vec<usize>> = members
        .iter()
        .map(|&i| nearest(train, members, i, k_used))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..needed {
        let slot = s % members.len();
        let base = members[slot];
        let nb = neighbours[slot][rng.random_range(0..k_used)];
        let u: f64 = rng.random();
        let (a, b) = (&train[base].features, &train[nb].features);
        let mut features = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            features[d] = a[d] + u * (b[d] - a[d]);
        }
        result.windows.push(FeatureWindow {
            start_t: train[base].start_t,
            features,
            label: train[base].label,
        });
        result.origins.push((base, nb));
    }
    result.n_synthetic = needed;
    Ok(result)
}

fn nearest(train: &[FeatureWindow], members: &[usize], of: usize, k: usize) -> Vec<usize> {
    let x = &train[of].features;
    let mut dists: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&j| j != of)
        .map(|&j| {
            let d: f64 = x
                .iter()
                .zip(&train[j].features)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, j)
        })
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.into_iter().take(k).map(|(_, j)| j).collect()
}
