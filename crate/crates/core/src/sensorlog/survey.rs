use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Post-retrieval in-app survey. Q1 (memory reliance) is a 4-point scale,
/// Q2..Q5 (ease, familiarity, confidence, willingness) are 5-point scales.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub trip_id: String,
    pub q1: u8,
    pub q2: u8,
    pub q3: u8,
    pub q4: u8,
    pub q5: u8,
}

impl SurveyResponse {
    pub fn answers(&self) -> [u8; 5] {
        [self.q1, self.q2, self.q3, self.q4, self.q5]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SurveyError {
    #[error("Q{question} = {value} outside [{min}, {max}]")]
    OutOfRange {
        question: u8,
        value: i64,
        min: i64,
        max: i64,
    },
}

const RANGES: [(i64, i64); 5] = [(1, 4), (1, 5), (1, 5), (1, 5), (1, 5)];

pub fn validate_survey(trip_id: &str, raw: [i64; 5]) -> Result<SurveyResponse, SurveyError> {
    let mut answers = [0u8; 5];
    for (i, (&value, &(min, max))) in raw.iter().zip(RANGES.iter()).enumerate() {
        if !(min..=max).contains(&value) {
            return Err(SurveyError::OutOfRange {
                question: i as u8 + 1,
                value,
                min,
                max,
            });
        }
        answers[i] = value as u8;
    }
    let [q1, q2, q3, q4, q5] = answers;
    Ok(SurveyResponse {
        trip_id: trip_id.to_owned(),
        q1,
        q2,
        q3,
        q4,
        q5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_visit_medians_are_valid() {
        let r = validate_survey("t", [2, 4, 1, 4, 4]).unwrap();
        assert_eq!(r.answers(), [2, 4, 1, 4, 4]);
    }

    #[test]
    fn q1_above_four_is_rejected() {
        let err = validate_survey("t", [5, 3, 3, 3, 3]).unwrap_err();
        assert_eq!(
            err,
            SurveyError::OutOfRange {
                question: 1,
                value: 5,
                min: 1,
                max: 4
            }
        );
    }

    #[test]
    fn all_minima_are_valid() {
        assert!(validate_survey("t", [1, 1, 1, 1, 1]).is_ok());
    }

    #[test]
    fn zero_and_six_are_rejected() {
        assert!(validate_survey("t", [1, 0, 1, 1, 1]).is_err());
        assert!(validate_survey("t", [1, 1, 1, 1, 6]).is_err());
    }
}
