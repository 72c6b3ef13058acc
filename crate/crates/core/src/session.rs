//! Exam and routine-session flow as a replayable state machine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::survival_rate;
use crate::sensorlog::{validate_survey, BeaconId, BeaconSighting, GeoPoint, Registry, SessionKind, SurveyResponse};
use crate::simtrip::EARTH_RADIUS_M;
use crate::tripseg::ArrivalDetector;
use crate::TimestampMs;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid coordinates ({lat}, {lon})")]
    InvalidCoordinates { lat: f64, lon: f64 },
    #[error("event log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
}

/// Great-circle distance in metres.
pub fn distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64, SessionError> {
    for (lat, lon) in [(lat1, lon1), (lat2, lon2)] {
        if !GeoPoint::new(lat, lon).is_valid() {
            return Err(SessionError::InvalidCoordinates { lat, lon });
        }
    }
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Registered,
    PreExamPending,
    Approaching,
    ReadyToStart,
    Countdown,
    Hunting,
    Verified,
    SurveyPending,
    Completed,
}

/// AED assigned to each exam.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamTargets {
    pub pre_exam: String,
    pub post_exam_1: String,
    /// The novel AED; routine sessions may not target it.
    pub post_exam_2: String,
}

impl ExamTargets {
    /// Practised AED = first registry entry, novel AED = second.
    pub fn from_registry(registry: &Registry) -> Option<Self> {
        let practised = registry.aeds.first()?;
        let novel = registry.aeds.get(1)?;
        Some(Self {
            pre_exam: practised.id.clone(),
            post_exam_1: practised.id.clone(),
            post_exam_2: novel.id.clone(),
        })
    }

    fn for_kind(&self, kind: SessionKind) -> Option<&str> {
        match kind {
            SessionKind::PreExam => Some(&self.pre_exam),
            SessionKind::PostExam1 => Some(&self.post_exam_1),
            SessionKind::PostExam2 => Some(&self.post_exam_2),
            SessionKind::Routine => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub ready_radius_m: f64,
    pub countdown_s: u32,
    pub beacon_rssi_dbm: f64,
    pub dwell_s: u32,
    pub points_per_hunt: u32,
    /// `None` derives targets from the registry.
    pub targets: Option<ExamTargets>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            ready_radius_m: 15.0,
            countdown_s: 3,
            beacon_rssi_dbm: -70.0,
            dwell_s: 3,
            points_per_hunt: 1,
            targets: None,
        }
    }
}

/// One line of a session event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    PreSurveySubmitted { t: TimestampMs },
    ExamSelected {
        t: TimestampMs,
        kind: SessionKind,
        /// Required for routine sessions; overrides the configured exam target.
        #[serde(default)]
        target_aed: Option<String>,
        /// Where the hunt starts.
        start: GeoPoint,
    },
    Position { t: TimestampMs, lat: f64, lon: f64 },
    StartPressed { t: TimestampMs },
    Tick { t: TimestampMs },
    Beacon { t: TimestampMs, beacon: BeaconId, rssi_dbm: f64 },
    SurveySubmitted { t: TimestampMs, answers: [i64; 5] },
}

impl SessionEvent {
    pub fn t(&self) -> TimestampMs {
        match self {
            SessionEvent::PreSurveySubmitted { t }
            | SessionEvent::ExamSelected { t, .. }
            | SessionEvent::Position { t, .. }
            | SessionEvent::StartPressed { t }
            | SessionEvent::Tick { t }
            | SessionEvent::Beacon { t, .. }
            | SessionEvent::SurveySubmitted { t, .. } => *t,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::PreSurveySubmitted { .. } => "pre_survey_submitted",
            SessionEvent::ExamSelected { .. } => "exam_selected",
            SessionEvent::Position { .. } => "position",
            SessionEvent::StartPressed { .. } => "start_pressed",
            SessionEvent::Tick { .. } => "tick",
            SessionEvent::Beacon { .. } => "beacon",
            SessionEvent::SurveySubmitted { .. } => "survey_submitted",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamFlags {
    pub pre: bool,
    pub post1: bool,
    pub post2: bool,
}

/// One finished hunt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuntRecord {
    pub kind: SessionKind,
    pub target_aed: String,
    pub hunt_start: TimestampMs,
    pub arrival_t: TimestampMs,
    pub elapsed_ms: i64,
    pub survival_pct: f64,
    pub survey: Option<SurveyResponse>,
}

#[derive(Debug, Clone, PartialEq)]
struct ActiveHunt {
    kind: SessionKind,
    target_aed: String,
    start: GeoPoint,
    countdown_end: Option<TimestampMs>,
    hunt_start: Option<TimestampMs>,
    detector: ArrivalDetector,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}")]
pub struct Rejection {
    pub reason: String,
}

fn reject<T>(reason: impl Into<String>) -> Result<T, Rejection> {
    Err(Rejection { reason: reason.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    participant_id: String,
    registry: Registry,
    config: SessionConfig,
    targets: Option<ExamTargets>,
    state: SessionState,
    last_t: Option<TimestampMs>,
    points: u32,
    exams: ExamFlags,
    active: Option<ActiveHunt>,
    elapsed_ms: i64,
    survival_pct: Option<f64>,
    hunts: Vec<HuntRecord>,
}

impl Session {
    pub fn new(participant_id: &str, registry: Registry, config: SessionConfig) -> Result<Self, SessionError> {
        if !(config.ready_radius_m > 0.0) || config.dwell_s == 0 {
            return Err(SessionError::InvalidConfig(
                "ready radius must be positive and dwell at least 1 s".into(),
            ));
        }
        let targets = config.targets.clone().or_else(|| ExamTargets::from_registry(&registry));
        if let Some(t) = &targets {
            for id in [&t.pre_exam, &t.post_exam_1, &t.post_exam_2] {
                if registry.aed(id).is_none() {
                    return Err(SessionError::InvalidConfig(format!("exam target {id} not in registry")));
                }
            }
        }
        Ok(Self {
            participant_id: participant_id.to_owned(),
            registry,
            config,
            targets,
            state: SessionState::Registered,
            last_t: None,
            points: 0,
            exams: ExamFlags::default(),
            active: None,
            elapsed_ms: 0,
            survival_pct: None,
            hunts: Vec::new(),
        })
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn points(&self) -> u32 {
        self.points
    }

    pub fn exams(&self) -> ExamFlags {
        self.exams
    }

    /// Survival value on screen, refreshed once per whole elapsed second.
    pub fn survival_display(&self) -> Option<f64> {
        self.survival_pct
    }

    pub fn elapsed_ms(&self) -> i64 {
        self.elapsed_ms
    }

    pub fn hunts(&self) -> &[HuntRecord] {
        &self.hunts
    }

    /// Applies one event. A rejected event leaves the session untouched.
    pub fn step(&mut self, event: &SessionEvent) -> Result<SessionState, Rejection> {
        let t = event.t();
        if self.last_t.is_some_and(|last| t < last) {
            return reject(format!("event at {t} precedes previous event"));
        }
        let next = self.transition(event)?;
        self.last_t = Some(t);
        self.state = next;
        Ok(next)
    }

    fn transition(&mut self, event: &SessionEvent) -> Result<SessionState, Rejection> {
        use SessionState::*;
        let state = self.state;
        match event {
            SessionEvent::PreSurveySubmitted { .. } => match state {
                Registered => Ok(PreExamPending),
                _ => reject("pre-survey already submitted"),
            },
            SessionEvent::ExamSelected { kind, target_aed, start, .. } => {
                if !matches!(state, PreExamPending | Completed) {
                    return reject(format!("cannot select a session while {state:?}"));
                }
                let target = self.resolve_target(*kind, target_aed.as_deref())?;
                if !start.is_valid() {
                    return reject("invalid start coordinates");
                }
                let beacon = self.registry.aed(&target).expect("resolved target exists").beacon.clone();
                self.active = Some(ActiveHunt {
                    kind: *kind,
                    target_aed: target,
                    start: *start,
                    countdown_end: None,
                    hunt_start: None,
                    detector: ArrivalDetector::new(beacon, self.config.beacon_rssi_dbm, self.config.dwell_s),
                });
                self.elapsed_ms = 0;
                self.survival_pct = None;
                Ok(Approaching)
            }
            SessionEvent::Position { lat, lon, .. } => match state {
                Approaching | ReadyToStart => {
                    let start = self.active.as_ref().expect("approach has a hunt").start;
                    let d = distance(*lat, *lon, start.lat, start.lon)
                        .map_err(|e| Rejection { reason: e.to_string() })?;
                    Ok(if d <= self.config.ready_radius_m { ReadyToStart } else { Approaching })
                }
                _ => Ok(state),
            },
            SessionEvent::StartPressed { t } => match state {
                ReadyToStart => {
                    let hunt = self.active.as_mut().expect("ready has a hunt");
                    hunt.countdown_end = Some(t + i64::from(self.config.countdown_s) * 1000);
                    Ok(Countdown)
                }
                _ => reject(format!("start pressed while {state:?}")),
            },
            SessionEvent::Tick { t } => match state {
                Countdown => {
                    let hunt = self.active.as_mut().expect("countdown has a hunt");
                    let end = hunt.countdown_end.expect("countdown end set");
                    if *t >= end {
                        hunt.hunt_start = Some(end);
                        self.advance_clock(*t);
                        Ok(Hunting)
                    } else {
                        Ok(Countdown)
                    }
                }
                Hunting => {
                    self.advance_clock(*t);
                    Ok(Hunting)
                }
                Verified => Ok(SurveyPending),
                _ => Ok(state),
            },
            SessionEvent::Beacon { t, beacon, rssi_dbm } => match state {
                Hunting => {
                    let hunt = self.active.as_mut().expect("hunting has a hunt");
                    let sighting = BeaconSighting { t: *t, beacon: beacon.clone(), rssi_dbm: *rssi_dbm };
                    match hunt.detector.feed(&sighting) {
                        Some(arrival) => {
                            self.advance_clock(arrival);
                            self.points += self.config.points_per_hunt;
                            let hunt = self.active.as_ref().expect("hunting has a hunt");
                            let elapsed_s = self.elapsed_ms as f64 / 1000.0;
                            self.hunts.push(HuntRecord {
                                kind: hunt.kind,
                                target_aed: hunt.target_aed.clone(),
                                hunt_start: hunt.hunt_start.expect("hunt started"),
                                arrival_t: arrival,
                                elapsed_ms: self.elapsed_ms,
                                survival_pct: survival_rate(elapsed_s).expect("elapsed is non-negative"),
                                survey: None,
                            });
                            Ok(Verified)
                        }
                        None => Ok(Hunting),
                    }
                }
                _ => Ok(state),
            },
            SessionEvent::SurveySubmitted { answers, .. } => match state {
                Verified | SurveyPending => {
                    let hunt = self.active.take().expect("verified has a hunt");
                    let trip_id = format!("{}-{}-{}", self.participant_id, hunt.kind.as_str(), self.hunts.len());
                    let survey = match validate_survey(&trip_id, *answers) {
                        Ok(s) => s,
                        Err(e) => {
                            self.active = Some(hunt);
                            return reject(format!("survey rejected: {e}"));
                        }
                    };
                    self.hunts.last_mut().expect("verified hunt recorded").survey = Some(survey);
                    match hunt.kind {
                        SessionKind::PreExam => self.exams.pre = true,
                        SessionKind::PostExam1 => self.exams.post1 = true,
                        SessionKind::PostExam2 => self.exams.post2 = true,
                        SessionKind::Routine => {}
                    }
                    Ok(Completed)
                }
                _ => reject(format!("survey submitted while {state:?}")),
            },
        }
    }

    fn advance_clock(&mut self, t: TimestampMs) {
        let Some(start) = self.active.as_ref().and_then(|h| h.hunt_start) else {
            return;
        };
        self.elapsed_ms = (t - start).max(0);
        let whole_s = (self.elapsed_ms / 1000) as f64;
        self.survival_pct = Some(survival_rate(whole_s).expect("elapsed is non-negative"));
    }

    fn resolve_target(&self, kind: SessionKind, requested: Option<&str>) -> Result<String, Rejection> {
        let exams = self.exams;
        match kind {
            SessionKind::PreExam if exams.pre => return reject("pre-exam already completed"),
            SessionKind::PostExam1 if exams.post1 => return reject("post-exam 1 already completed"),
            SessionKind::PostExam2 if exams.post2 => return reject("post-exam 2 already completed"),
            SessionKind::PreExam => {}
            _ if !exams.pre => {
                return reject(format!("{} requires a completed pre-exam", kind.as_str()));
            }
            _ => {}
        }
        let configured = self.targets.as_ref().and_then(|t| t.for_kind(kind));
        let Some(id) = requested.or(configured) else {
            return reject(if kind.is_exam() {
                "no exam target configured"
            } else {
                "routine session needs a target AED"
            });
        };
        if self.registry.aed(id).is_none() {
            return reject(format!("unknown AED {id}"));
        }
        if kind == SessionKind::Routine && self.targets.as_ref().is_some_and(|t| t.post_exam_2 == id) {
            return reject(format!("{id} is reserved for the second post-exam"));
        }
        Ok(id.to_owned())
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            participant_id: self.participant_id.clone(),
            final_state: self.state,
            points: self.points,
            exams: self.exams,
            elapsed_ms: self.elapsed_ms,
            hunts: self.hunts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub participant_id: String,
    pub final_state: SessionState,
    pub points: u32,
    pub exams: ExamFlags,
    /// Elapsed hunt time of the last hunt.
    pub elapsed_ms: i64,
    pub hunts: Vec<HuntRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub index: usize,
    pub t: TimestampMs,
    pub event: String,
    pub state: SessionState,
    pub points: u32,
    pub survival_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedEvent {
    pub index: usize,
    pub t: TimestampMs,
    pub event: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub trajectory: Vec<TrajectoryStep>,
    pub rejections: Vec<RejectedEvent>,
    pub record: SessionRecord,
}

/// Runs every event through a fresh session.
pub fn replay(mut session: Session, events: &[SessionEvent]) -> Replay {
    let mut trajectory = Vec::with_capacity(events.len());
    let mut rejections = Vec::new();
    for (index, ev) in events.iter().enumerate() {
        match session.step(ev) {
            Ok(state) => trajectory.push(TrajectoryStep {
                index,
                t: ev.t(),
                event: ev.name().to_owned(),
                state,
                points: session.points,
                survival_pct: session.survival_pct,
            }),
            Err(r) => rejections.push(RejectedEvent {
                index,
                t: ev.t(),
                event: ev.name().to_owned(),
                reason: r.reason,
            }),
        }
    }
    Replay { trajectory, rejections, record: session.record() }
}

/// One JSON event per line; blank lines are skipped.
pub fn parse_event_log(text: &str) -> Result<Vec<SessionEvent>, SessionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SessionError::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn events_to_jsonl(events: &[SessionEvent]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
        .collect()
}
