use serde::{Deserialize, Serialize};

use super::{class_index, predict, PausenetError, PausingModel};
use crate::dsp::FeatureWindow;
use crate::sensorlog::Activity;

/// Counts indexed `[true class][predicted class]`, class order moving, pausing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub moving_as_moving: usize,
    pub moving_as_pausing: usize,
    pub pausing_as_moving: usize,
    pub pausing_as_pausing: usize,
}

impl Confusion {
    fn matrix(&self) -> [[usize; 2]; 2] {
        [
            [self.moving_as_moving, self.moving_as_pausing],
            [self.pausing_as_moving, self.pausing_as_pausing],
        ]
    }

    pub fn total(&self) -> usize {
        self.matrix().iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub moving: ClassMetrics,
    pub pausing: ClassMetrics,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl EvalMetrics {
    /// Derives every metric from confusion counts. Undefined ratios are 0.
    pub fn from_confusion(confusion: Confusion) -> Self {
        let m = confusion.matrix();
        let total = confusion.total();
        let class = |c: usize| {
            let tp = m[c][c] as f64;
            let predicted = (m[0][c] + m[1][c]) as f64;
            let support = m[c][0] + m[c][1];
            let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let recall = if support > 0 { tp / support as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics { precision, recall, f1, support }
        };
        let (moving, pausing) = (class(0), class(1));
        let weighted_f1 = if total > 0 {
            (moving.f1 * moving.support as f64 + pausing.f1 * pausing.support as f64) / total as f64
        } else {
            0.0
        };
        let accuracy = if total > 0 {
            (m[0][0] + m[1][1]) as f64 / total as f64
        } else {
            0.0
        };
        Self { moving, pausing, weighted_f1, accuracy, confusion }
    }
}

pub fn evaluate_predictions(
    truth: &[Activity],
    predicted: &[Activity],
) -> Result<EvalMetrics, PausenetError> {
    if truth.is_empty() {
        return Err(PausenetError::EmptyEvalSet);
    }
    let mut m = [[0usize; 2]; 2];
    for (t, p) in truth.iter().zip(predicted) {
        m[class_index(*t)][class_index(*p)] += 1;
    }
    Ok(EvalMetrics::from_confusion(Confusion {
        moving_as_moving: m[0][0],
        moving_as_pausing: m[0][1],
        pausing_as_moving: m[1][0],
        pausing_as_pausing: m[1][1],
    }))
}

pub fn evaluate(model: &PausingModel, eval: &[FeatureWindow]) -> Result<EvalMetrics, PausenetError> {
    if eval.is_empty() {
        return Err(PausenetError::EmptyEvalSet);
    }
    let truth = eval
        .iter()
        .map(|w| w.label.ok_or(PausenetError::Unlabeled(w.start_t)))
        .collect::<Result<Vec<_>, _>>()?;
    let predicted = predict(model, eval)?;
    evaluate_predictions(&truth, &predicted)
}
