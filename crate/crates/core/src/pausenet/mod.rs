//! Moving / exploratory-pausing window classifier.
//!
//! Pipeline: [`stratified_split`] → [`smote`] on the training part →
//! [`train`] an RBF-kernel SVM → [`predict`] / [`evaluate`].

mod eval;
mod smote;
mod split;
mod svm;

use thiserror::Error;

use crate::sensorlog::Activity;

pub use eval::{evaluate, evaluate_predictions, ClassMetrics, Confusion, EvalMetrics};
pub use smote::{smote, SmoteResult};
pub use split::stratified_split;
pub use svm::{
    decision_value, predict, train, KernelParams, ModelMetadata, PausingModel, Scaler,
    TrainParams,
};

#[derive(Debug, Error, PartialEq)]
pub enum PausenetError {
    #[error("window at {0} ms has no label")]
    Unlabeled(i64),
    #[error("class `{class}` has {count} member(s); at least {needed} required")]
    ClassTooSmall {
        class: Activity,
        count: usize,
        needed: usize,
    },
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("SMO did not converge within {cap} iterations (final KKT violation {violation:.3e})")]
    NotConverged { cap: usize, violation: f64 },
    #[error("feature vector has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
}

/// +1 for pausing, -1 for moving.
fn sign_of(label: Activity) -> f64 {
    match label {
        Activity::Pausing => 1.0,
        Activity::Moving => -1.0,
    }
}

fn class_index(label: Activity) -> usize {
    match label {
        Activity::Moving => 0,
        Activity::Pausing => 1,
    }
}

const CLASSES: [Activity; 2] = [Activity::Moving, Activity::Pausing];
