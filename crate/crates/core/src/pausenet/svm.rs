use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{class_index, sign_of, PausenetError};
use crate::dsp::{FeatureWindow, FEATURE_DIM};
use crate::sensorlog::Activity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub c: f64,
    /// `None` selects `1 / (dim * mean per-feature variance)` of the scaled data.
    pub gamma: Option<f64>,
    pub seed: u64,
    /// KKT tolerance on the maximal violating pair.
    pub tol: f64,
    /// `None` selects `max(10^7, 100 n)`.
    pub max_iter: Option<usize>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            seed: 0,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

/// Per-feature z-score parameters. A feature with zero training variance gets
/// `std = 1`, which maps it to a constant 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    fn fit(rows: &[&[f64]]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for r in rows {
            for d in 0..dim {
                std[d] += (r[d] - mean[d]).powi(2);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) || !s.is_finite() {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Always `"rbf"`.
    pub kind: String,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    /// Latest window start in the training set; keeps the model file a pure
    /// function of its inputs.
    pub train_timestamp_ms: i64,
    /// Training counts per class after augmentation: `[moving, pausing]`.
    pub class_counts: [usize; 2],
    pub iterations: usize,
}

/// Trained RBF-kernel SVM with its feature scaler. Decision value
/// `f(x) = sum_i alpha_i K(sv_i, z(x)) + bias`; positive means pausing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PausingModel {
    pub scaler: Scaler,
    pub kernel: KernelParams,
    pub c: f64,
    /// Support vectors in scaled feature space.
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed dual coefficients `y_i * alpha_i`.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub metadata: ModelMetadata,
}

impl PausingModel {
    pub fn dim(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn validate(&self) -> Result<(), PausenetError> {
        let invalid = |m: &str| Err(PausenetError::InvalidModel(m.to_owned()));
        let dim = self.dim();
        if self.scaler.std.len() != dim {
            return invalid("scaler mean and std lengths differ");
        }
        if self.scaler.std.iter().any(|s| !(*s > 0.0)) {
            return invalid("scaler std must be positive");
        }
        if self.kernel.kind != "rbf" || !(self.kernel.gamma > 0.0) {
            return invalid("kernel must be rbf with positive gamma");
        }
        if !(self.c > 0.0) {
            return invalid("C must be positive");
        }
        if self.alphas.len() != self.support_vectors.len() {
            return invalid("alphas and support vectors differ in count");
        }
        if self.support_vectors.iter().any(|sv| sv.len() != dim) {
            return invalid("support vector dimension differs from scaler");
        }
        if self.alphas.iter().any(|a| a.abs() > self.c * (1.0 + 1e-12)) {
            return invalid("|alpha| exceeds C");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PausenetError> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| PausenetError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, PausenetError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PausenetError::InvalidModel(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

const FULL_MATRIX_LIMIT: usize = 4096;
const TAU: f64 = 1e-12;

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    full: Option<Vec<f64>>,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = x.len();
        let full = (n <= FULL_MATRIX_LIMIT).then(|| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = 1.0;
                for j in 0..i {
                    let k = rbf(gamma, &x[i], &x[j]);
                    m[i * n + j] = k;
                    m[j * n + i] = k;
                }
            }
            m
        });
        Self { x, gamma, full }
    }

    fn row(&self, i: usize, buf: &mut Vec<f64>) {
        let n = self.x.len();
        buf.clear();
        match &self.full {
            Some(m) => buf.extend_from_slice(&m[i * n..(i + 1) * n]),
            None => buf.extend(self.x.iter().map(|xj| rbf(self.gamma, &self.x[i], xj))),
        }
    }
}

/// Fits the scaler and solves the soft-margin dual by sequential minimal
/// optimisation with second-order working-set selection.
pub fn train(set: &[FeatureWindow], params: &TrainParams) -> Result<PausingModel, PausenetError> {
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(PausenetError::InvalidParam(format!("C = {}", params.c)));
    }
    if let Some(g) = params.gamma {
        if !(g > 0.0) || !g.is_finite() {
            return Err(PausenetError::InvalidParam(format!("gamma = {g}")));
        }
    }
    if !(params.tol > 0.0) {
        return Err(PausenetError::InvalidParam(format!("tolerance = {}", params.tol)));
    }
    let mut class_counts = [0usize; 2];
    let mut y = Vec::with_capacity(set.len());
    for w in set {
        let label = w.label.ok_or(PausenetError::Unlabeled(w.start_t))?;
        class_counts[class_index(label)] += 1;
        y.push(sign_of(label));
    }
    if class_counts.contains(&0) {
        return Err(PausenetError::SingleClass);
    }

    let raw: Vec<&[f64]> = set.iter().map(|w| &w.features[..]).collect();
    let scaler = Scaler::fit(&raw);
    let x: Vec<Vec<f64>> = raw.iter().map(|r| scaler.transform(r)).collect();
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(&x));
    let n = x.len();
    let c = params.c;
    let cap = params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000));

    let kernel = KernelRows::new(&x, gamma);
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let (mut row_i, mut row_j) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut iterations = 0;

    loop {
        // maximal violating pair, second-order selection for j
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        if i_sel != usize::MAX {
            kernel.row(i_sel, &mut row_i);
        }
        for t in 0..n {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            if i_sel == usize::MAX {
                continue;
            }
            let b = gmax + yg;
            if b > 0.0 {
                let a = 2.0 - 2.0 * row_i[t];
                let a = if a > 0.0 { a } else { TAU };
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        let violation = gmax + gmax2;
        if violation < params.tol || j_sel == usize::MAX {
            break;
        }
        if iterations >= cap {
            return Err(PausenetError::NotConverged { cap, violation });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        kernel.row(j, &mut row_j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = {
            let q = 2.0 - 2.0 * row_i[j];
            if q > 0.0 { q } else { TAU }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * di + y[j] * row_j[t] * dj);
        }
    }

    let rho = {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum_free) = (0usize, 0.0);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if alpha[t] >= c {
                if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else if alpha[t] <= 0.0 {
                if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else {
                free += 1;
                sum_free += yg;
            }
        }
        if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 }
    };

    let (support_vectors, alphas) = x
        .iter()
        .zip(alpha.iter().zip(&y))
        .filter(|(_, (a, _))| **a > 0.0)
        .map(|(xv, (a, yv))| (xv.clone(), a * yv))
        .unzip();
    let model = PausingModel {
        scaler,
        kernel: KernelParams { kind: "rbf".into(), gamma },
        c,
        support_vectors,
        alphas,
        bias: -rho,
        metadata: ModelMetadata {
            seed: params.seed,
            train_timestamp_ms: set.iter().map(|w| w.start_t).max().unwrap_or(0),
            class_counts,
            iterations,
        },
    };
    Ok(model)
}

fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let dim = x[0].len();
    let n = x.len() as f64;
    let mut total = 0.0;
    for d in 0..dim {
        let mean = x.iter().map(|r| r[d]).sum::<f64>() / n;
        total += x.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = total / dim as f64;
    if mean_var > 0.0 {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0 / dim as f64
    }
}

/// Raw decision value for an unscaled feature vector.
pub fn decision_value(model: &PausingModel, features: &[f64]) -> Result<f64, PausenetError> {
    if features.len() != model.dim() {
        return Err(PausenetError::DimensionMismatch {
            expected: model.dim(),
            got: features.len(),
        });
    }
    let z = model.scaler.transform(features);
    let gamma = model.kernel.gamma;
    Ok(model
        .support_vectors
        .iter()
        .zip(&model.alphas)
        .map(|(sv, a)| a * rbf(gamma, sv, &z))
        .sum::<f64>()
        + model.bias)
}

/// Labels windows by the sign of the decision value; exactly 0 is moving.
pub fn predict(model: &PausingModel, windows: &[FeatureWindow]) -> Result<Vec<Activity>, PausenetError> {
    if model.dim() != FEATURE_DIM {
        return Err(PausenetError::DimensionMismatch {
            expected: FEATURE_DIM,
            got: model.dim(),
        });
    }
    windows
        .iter()
        .map(|w| {
            decision_value(model, &w.features).map(|v| {
                if v > 0.0 {
                    Activity::Pausing
                } else {
                    Activity::Moving
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win(i: i64, a: f64, b: f64, label: Activity) -> FeatureWindow {
        let mut features = [0.0; FEATURE_DIM];
        features[0] = a;
        features[1] = b;
        FeatureWindow { start_t: i, features, label: Some(label) }
    }

    #[test]
    fn two_separable_points() {
        let set = [win(0, 0.0, 0.0, Activity::Moving), win(1, 1.0, 1.0, Activity::Pausing)];
        let model = train(&set, &TrainParams::default()).unwrap();
        assert_eq!(predict(&model, &set).unwrap(), vec![Activity::Moving, Activity::Pausing]);
    }

    #[test]
    fn xor_layout_is_learned() {
        let set = [
            win(0, 0.0, 0.0, Activity::Moving),
            win(1, 1.0, 1.0, Activity::Moving),
            win(2, 0.0, 1.0, Activity::Pausing),
            win(3, 1.0, 0.0, Activity::Pausing),
        ];
        let params = TrainParams { c: 10.0, ..TrainParams::default() };
        let model = train(&set, &params).unwrap();
        let labels: Vec<_> = set.iter().map(|w| w.label.unwrap()).collect();
        assert_eq!(predict(&model, &set).unwrap(), labels);
    }

    #[test]
    fn duplicated_data_gives_same_signs() {
        let mut set = Vec::new();
        for i in 0..12 {
            let f = f64::from(i);
            set.push(win(i.into(), f.cos(), f.sin(), Activity::Moving));
            set.push(win((100 + i).into(), 3.0 * f.cos(), 3.0 * f.sin(), Activity::Pausing));
        }
        let doubled: Vec<_> = set.iter().chain(set.iter()).cloned().collect();
        let a = train(&set, &TrainParams::default()).unwrap();
        let b = train(&doubled, &TrainParams::default()).unwrap();
        let probes: Vec<_> = (-8..=8)
            .flat_map(|i| (-8..=8).map(move |j| win(0, f64::from(i) * 0.5, f64::from(j) * 0.5, Activity::Moving)))
            .collect();
        assert_eq!(predict(&a, &probes).unwrap(), predict(&b, &probes).unwrap());
    }

    #[test]
    fn alphas_bounded_and_json_round_trips() {
        let set: Vec<_> = (0..20)
            .map(|i| {
                let f = f64::from(i);
                let label = if i % 3 == 0 { Activity::Pausing } else { Activity::Moving };
                win(i.into(), (f * 0.7).sin(), (f * 1.3).cos(), label)
            })
            .collect();
        let model = train(&set, &TrainParams::default()).unwrap();
        assert!(model.alphas.iter().all(|a| a.abs() <= model.c));
        assert_eq!(model.alphas.len(), model.support_vectors.len());
        let back = PausingModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn constant_feature_gets_unit_std() {
        let set = [win(0, 0.0, 5.0, Activity::Moving), win(1, 1.0, 5.0, Activity::Pausing)];
        let model = train(&set, &TrainParams::default()).unwrap();
        assert_eq!(model.scaler.std[1], 1.0);
        assert_eq!(model.scaler.std[2], 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let set = [win(0, 0.0, 0.0, Activity::Moving), win(1, 1.0, 1.0, Activity::Pausing)];
        let model = train(&set, &TrainParams::default()).unwrap();
        assert!(matches!(
            decision_value(&model, &[0.0; 3]),
            Err(PausenetError::DimensionMismatch { expected: 18, got: 3 })
        ));
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let set: Vec<_> = (0..30)
            .map(|i| {
                let f = f64::from(i);
                let label = if i % 2 == 0 { Activity::Pausing } else { Activity::Moving };
                win(i.into(), f.sin(), (2.0 * f).cos(), label)
            })
            .collect();
        let params = TrainParams { max_iter: Some(1), ..TrainParams::default() };
        assert!(matches!(train(&set, &params), Err(PausenetError::NotConverged { cap: 1, .. })));
    }

    #[test]
    fn single_class_is_rejected() {
        let set = [win(0, 0.0, 0.0, Activity::Moving), win(1, 1.0, 1.0, Activity::Moving)];
        assert_eq!(train(&set, &TrainParams::default()), Err(PausenetError::SingleClass));
    }
}
