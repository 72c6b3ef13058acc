use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{class_index, PausenetError, CLASSES};
use crate::dsp::FeatureWindow;

/// Stratified train/eval partition.
///
/// The training size is `floor(train_frac * n)`; each class gets the floor of
/// its proportional share and leftover slots go to the largest fractional
/// remainders. Both sides keep the input order.
pub fn stratified_split(
    windows: &[FeatureWindow],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<FeatureWindow>, Vec<FeatureWindow>), PausenetError> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(PausenetError::InvalidParam(format!(
            "train fraction {train_frac} outside (0, 1)"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, w) in windows.iter().enumerate() {
        let label = w.label.ok_or(PausenetError::Unlabeled(w.start_t))?;
        by_class[class_index(label)].push(i);
    }
    for (class, members) in CLASSES.iter().zip(&by_class) {
        if members.len() < 2 {
            return Err(PausenetError::ClassTooSmall {
                class: *class,
                count: members.len(),
                needed: 2,
            });
        }
    }

    let n = windows.len();
    let n_train = (train_frac * n as f64 + 1e-9).floor() as usize;
    let shares: Vec<f64> = by_class
        .iter()
        .map(|m| m.len() as f64 * n_train as f64 / n as f64)
        .collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut leftover = n_train - counts.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = vec![0, 1];
    by_remainder.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for c in by_remainder {
        if leftover == 0 {
            break;
        }
        counts[c] += 1;
        leftover -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; n];
    for (members, &count) in by_class.iter_mut().zip(&counts) {
        let count = count.clamp(1, members.len() - 1);
        members.shuffle(&mut rng);
        for &i in &members[..count] {
            in_train[i] = true;
        }
    }
    let (train, eval): (Vec<_>, Vec<_>) = windows
        .iter()
        .zip(&in_train)
        .partition(|(_, &keep)| keep);
    Ok((
        train.into_iter().map(|(w, _)| w.clone()).collect(),
        eval.into_iter().map(|(w, _)| w.clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FEATURE_DIM;
    use crate::sensorlog::Activity;

    fn corpus(moving: usize, pausing: usize) -> Vec<FeatureWindow> {
        (0..moving + pausing)
            .map(|i| FeatureWindow {
                start_t: i as i64 * 2000,
                features: [i as f64; FEATURE_DIM],
                label: Some(if i < moving { Activity::Moving } else { Activity::Pausing }),
            })
            .collect()
    }

    fn count(ws: &[FeatureWindow], label: Activity) -> usize {
        ws.iter().filter(|w| w.label == Some(label)).count()
    }

    #[test]
    fn study_sized_corpus() {
        let (train, eval) = stratified_split(&corpus(1125, 187), 0.7, 3).unwrap();
        assert_eq!(count(&train, Activity::Moving), 787);
        assert_eq!(count(&train, Activity::Pausing), 131);
        assert_eq!(count(&eval, Activity::Moving), 338);
        assert_eq!(count(&eval, Activity::Pausing), 56);
    }

    #[test]
    fn balanced_ten_and_ten() {
        let (train, eval) = stratified_split(&corpus(10, 10), 0.7, 0).unwrap();
        assert_eq!((count(&train, Activity::Moving), count(&train, Activity::Pausing)), (7, 7));
        assert_eq!(eval.len(), 6);
    }

    #[test]
    fn same_seed_same_partition() {
        let data = corpus(50, 12);
        assert_eq!(stratified_split(&data, 0.7, 9).unwrap(), stratified_split(&data, 0.7, 9).unwrap());
        assert_ne!(stratified_split(&data, 0.7, 9).unwrap().0, stratified_split(&data, 0.7, 10).unwrap().0);
    }

    #[test]
    fn singleton_class_is_rejected() {
        let err = stratified_split(&corpus(10, 1), 0.7, 0).unwrap_err();
        assert!(matches!(err, PausenetError::ClassTooSmall { class: Activity::Pausing, count: 1, .. }));
    }
}
