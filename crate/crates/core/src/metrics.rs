//! Efficiency metrics and the survival display model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensorlog::{Guidance, SessionKind};
use crate::tripseg::TripSummary;
use crate::Warning;

pub const SURVIVAL_INTERCEPT: f64 = 92.13;
pub const SURVIVAL_DECAY_PER_MIN: f64 = 0.147;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("elapsed time {0} s is negative or not finite")]
    InvalidElapsed(f64),
    #[error("baseline duration {0} s must be positive")]
    NonPositiveBaseline(f64),
}

/// Displayed survival percentage after `elapsed_s` seconds of retrieval. The
/// retrieval time is doubled to account for the return trip before applying
/// the exponential decay per minute.
pub fn survival_rate(elapsed_s: f64) -> Result<f64, MetricsError> {
    if !(elapsed_s >= 0.0) || !elapsed_s.is_finite() {
        return Err(MetricsError::InvalidElapsed(elapsed_s));
    }
    let minutes = 2.0 * elapsed_s / 60.0;
    Ok(SURVIVAL_INTERCEPT * (-SURVIVAL_DECAY_PER_MIN * minutes).exp())
}

/// Relative reduction `(pre - post) / pre`.
pub fn delta(pre: f64, post: f64) -> Result<f64, MetricsError> {
    if !(pre > 0.0) {
        return Err(MetricsError::NonPositiveBaseline(pre));
    }
    Ok((pre - post) / pre)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantOutcome {
    pub participant_id: String,
    pub group: Guidance,
    pub d_t_pre: f64,
    pub d_t_post: f64,
    pub d_p_pre: f64,
    pub d_p_post: f64,
    pub delta_d_t: f64,
    /// Undefined when the pre-exam had no pauses.
    pub delta_d_p: Option<f64>,
    pub prep_pre: f64,
    pub prep_post: f64,
    pub building_search_pre: f64,
    pub building_search_post: f64,
    pub indoor_search_pre: f64,
    pub indoor_search_post: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    pub outcomes: Vec<ParticipantOutcome>,
    pub warnings: Vec<Warning>,
}

/// Counts of participants whose total duration fell or rose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChangeCounts {
    pub improved: usize,
    pub worsened: usize,
    pub unchanged: usize,
}

pub fn change_counts(outcomes: &[ParticipantOutcome]) -> ChangeCounts {
    let mut c = ChangeCounts::default();
    for o in outcomes {
        match o.d_t_post.partial_cmp(&o.d_t_pre) {
            Some(std::cmp::Ordering::Less) => c.improved += 1,
            Some(std::cmp::Ordering::Greater) => c.worsened += 1,
            _ => c.unchanged += 1,
        }
    }
    c
}

fn secs(ms: Option<i64>) -> f64 {
    ms.map_or(f64::NAN, |v| v as f64 / 1000.0)
}

/// Pairs each participant's pre-exam with their first post-exam, ordered by
/// participant id. Participants lacking exactly one complete trip of each
/// kind are excluded with a warning.
pub fn pair_outcomes(trips: &[TripSummary]) -> Pairing {
    let mut by_participant: BTreeMap<&str, (Vec<&TripSummary>, Vec<&TripSummary>)> = BTreeMap::new();
    for t in trips {
        let slot = by_participant.entry(&t.participant_id).or_default();
        match t.session_kind {
            SessionKind::PreExam => slot.0.push(t),
            SessionKind::PostExam1 => slot.1.push(t),
            _ => {}
        }
    }

    let mut out = Pairing::default();
    for (pid, (pre, post)) in by_participant {
        let (pre, post) = match (pre.as_slice(), post.as_slice()) {
            ([a], [b]) => (*a, *b),
            _ => {
                out.warnings.push(Warning::new(
                    "unpaired",
                    format!(
                        "participant `{pid}` has {} pre-exam and {} post-exam trip(s); excluded",
                        pre.len(),
                        post.len()
                    ),
                ));
                continue;
            }
        };
        let (Some(d_t_pre), Some(d_t_post)) = (pre.d_t(), post.d_t()) else {
            let which = if pre.complete { &post.trip_id } else { &pre.trip_id };
            out.warnings.push(Warning::new(
                "incomplete",
                format!("participant `{pid}`: trip `{which}` incomplete; excluded"),
            ));
            continue;
        };
        if pre.guidance != post.guidance {
            out.warnings.push(Warning::new(
                "group_mismatch",
                format!("participant `{pid}`: exam trips disagree on guidance; using post-exam"),
            ));
        }
        let d_p_pre = pre.d_p().unwrap_or(0.0);
        let d_p_post = post.d_p().unwrap_or(0.0);
        let Ok(delta_d_t) = delta(d_t_pre, d_t_post) else {
            out.warnings.push(Warning::new(
                "zero_duration",
                format!("participant `{pid}`: pre-exam duration is zero; excluded"),
            ));
            continue;
        };
        out.outcomes.push(ParticipantOutcome {
            participant_id: pid.to_owned(),
            group: post.guidance,
            d_t_pre,
            d_t_post,
            d_p_pre,
            d_p_post,
            delta_d_t,
            delta_d_p: delta(d_p_pre, d_p_post).ok(),
            prep_pre: secs(pre.prep_ms),
            prep_post: secs(post.prep_ms),
            building_search_pre: secs(pre.building_search_ms),
            building_search_post: secs(post.building_search_ms),
            indoor_search_pre: secs(pre.indoor_search_ms),
            indoor_search_post: secs(post.indoor_search_ms),
        });
    }
    out
}

/// Column order: participant_id, group, D_T_pre, D_T_post, D_P_pre, D_P_post,
/// delta_D_T, delta_D_P, then per-phase pre/post seconds.
pub fn outcomes_to_csv(outcomes: &[ParticipantOutcome]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "participant_id",
        "group",
        "D_T_pre",
        "D_T_post",
        "D_P_pre",
        "D_P_post",
        "delta_D_T",
        "delta_D_P",
        "prep_pre",
        "prep_post",
        "building_search_pre",
        "building_search_post",
        "indoor_search_pre",
        "indoor_search_post",
    ])
    .expect("in-memory CSV write");
    for o in outcomes {
        let mut rec = vec![o.participant_id.clone(), o.group.as_str().to_owned()];
        rec.extend(
            [o.d_t_pre, o.d_t_post, o.d_p_pre, o.d_p_post, o.delta_d_t]
                .iter()
                .map(|v| v.to_string()),
        );
        rec.push(o.delta_d_p.map(|v| v.to_string()).unwrap_or_default());
        rec.extend(
            [
                o.prep_pre,
                o.prep_post,
                o.building_search_pre,
                o.building_search_post,
                o.indoor_search_pre,
                o.indoor_search_post,
            ]
            .iter()
            .map(|v| v.to_string()),
        );
        w.write_record(&rec).expect("in-memory CSV write");
    }
    w.into_inner().expect("in-memory CSV flush")
}

#[derive(Debug, Deserialize)]
struct OutcomeRow {
    participant_id: String,
    group: Guidance,
    #[serde(rename = "D_T_pre")]
    d_t_pre: f64,
    #[serde(rename = "D_T_post")]
    d_t_post: f64,
    #[serde(rename = "D_P_pre")]
    d_p_pre: f64,
    #[serde(rename = "D_P_post")]
    d_p_post: f64,
    #[serde(rename = "delta_D_T")]
    delta_d_t: f64,
    #[serde(rename = "delta_D_P")]
    delta_d_p: Option<f64>,
    prep_pre: f64,
    prep_post: f64,
    building_search_pre: f64,
    building_search_post: f64,
    indoor_search_pre: f64,
    indoor_search_post: f64,
}

pub fn outcomes_from_csv(bytes: &[u8]) -> Result<Vec<ParticipantOutcome>, csv::Error> {
    csv::Reader::from_reader(bytes)
        .deserialize::<OutcomeRow>()
        .map(|r| {
            r.map(|r| ParticipantOutcome {
                participant_id: r.participant_id,
                group: r.group,
                d_t_pre: r.d_t_pre,
                d_t_post: r.d_t_post,
                d_p_pre: r.d_p_pre,
                d_p_post: r.d_p_post,
                delta_d_t: r.delta_d_t,
                delta_d_p: r.delta_d_p,
                prep_pre: r.prep_pre,
                prep_post: r.prep_post,
                building_search_pre: r.building_search_pre,
                building_search_post: r.building_search_post,
                indoor_search_pre: r.indoor_search_pre,
                indoor_search_post: r.indoor_search_post,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_at_zero_is_intercept() {
        assert_eq!(survival_rate(0.0).unwrap(), 92.13);
    }

    #[test]
    fn survival_at_thirty_seconds() {
        // 92.13 * exp(-0.147), evaluated at 40 significant digits
        let want = 79.535_274_139_365_508;
        assert!((survival_rate(30.0).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn survival_rejects_negative() {
        assert!(survival_rate(-1.0).is_err());
        assert!(survival_rate(f64::NAN).is_err());
    }

    #[test]
    fn deltas() {
        assert_eq!(delta(100.0, 50.0).unwrap(), 0.5);
        assert_eq!(delta(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(delta(100.0, 150.0).unwrap(), -0.5);
        assert!(delta(0.0, 1.0).is_err());
    }

    fn trip(pid: &str, kind: SessionKind, d_t_ms: Option<i64>, d_p_ms: i64) -> TripSummary {
        TripSummary {
            trip_id: format!("{pid}-{}", kind.as_str()),
            participant_id: pid.into(),
            session_kind: kind,
            guidance: Guidance::Map,
            complete: d_t_ms.is_some(),
            start_t: 0,
            prep_end: 0,
            entry_t: d_t_ms.map(|d| d / 2),
            arrival_t: d_t_ms,
            prep_ms: d_t_ms.map(|_| 0),
            building_search_ms: d_t_ms.map(|d| d / 2),
            indoor_search_ms: d_t_ms.map(|d| d - d / 2),
            d_t_ms,
            d_p_ms: d_t_ms.map(|_| d_p_ms),
            n_warnings: 0,
        }
    }

    #[test]
    fn pairs_and_exclusions() {
        let trips = vec![
            trip("p2", SessionKind::PreExam, Some(100_000), 10_000),
            trip("p2", SessionKind::PostExam1, Some(60_000), 4_000),
            trip("p1", SessionKind::PreExam, Some(80_000), 0),
            trip("p1", SessionKind::PostExam1, Some(90_000), 2_000),
            trip("p1", SessionKind::Routine, Some(10_000), 0),
            trip("p3", SessionKind::PreExam, Some(80_000), 0),
            trip("p3", SessionKind::PostExam1, None, 0),
            trip("p4", SessionKind::PreExam, Some(80_000), 0),
        ];
        let r = pair_outcomes(&trips);
        let ids: Vec<_> = r.outcomes.iter().map(|o| o.participant_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2"]);
        assert_eq!(r.warnings.len(), 2);
        assert_eq!(r.outcomes[0].delta_d_p, None);
        assert!((r.outcomes[1].delta_d_t - 0.4).abs() < 1e-15);
        assert_eq!(r.outcomes[1].delta_d_p, Some(0.6));
        let c = change_counts(&r.outcomes);
        assert_eq!((c.improved, c.worsened), (1, 1));
    }

    #[test]
    fn outcomes_csv_round_trips() {
        let trips = vec![
            trip("p1", SessionKind::PreExam, Some(80_000), 0),
            trip("p1", SessionKind::PostExam1, Some(90_000), 2_000),
            trip("p2", SessionKind::PreExam, Some(100_300), 10_000),
            trip("p2", SessionKind::PostExam1, Some(60_100), 4_000),
        ];
        let o = pair_outcomes(&trips).outcomes;
        let csv = outcomes_to_csv(&o);
        assert!(csv.starts_with(b"participant_id,group,D_T_pre,D_T_post,D_P_pre,D_P_post,delta_D_T,delta_D_P"));
        assert_eq!(outcomes_from_csv(&csv).unwrap(), o);
    }
}
