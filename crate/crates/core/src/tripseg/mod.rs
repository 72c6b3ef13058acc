//! Trip segmentation into Preparation, Building Search and Indoor AED Search.
//!
//! * Preparation ends with the initial run of pausing windows.
//! * Building Search ends at Wi-Fi entry: the first confirmed run of seconds
//!   with a target-building BSSID at or above the Wi-Fi threshold.
//! * Indoor Search ends at arrival: the target beacon held at or above the
//!   beacon threshold for the dwell time.
//!
//! Boundaries and phase durations are integer milliseconds, so the three
//! phases always sum exactly to the total duration.

mod detect;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{
    classify_windows, detect_arrival, detect_entry, detect_pauses, pause_intervals,
    ArrivalDetector, PauseDetectionError, WindowLabel,
};

use crate::dsp::WINDOW_MS;
use crate::pausenet::PausingModel;
use crate::sensorlog::{Activity, Guidance, Registry, SensorLog, SessionKind};
use crate::{TimestampMs, Warning};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub beacon_rssi_dbm: f64,
    pub dwell_s: u32,
    pub wifi_rssi_dbm: f64,
    pub confirm_s: u32,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            beacon_rssi_dbm: -70.0,
            dwell_s: 3,
            wifi_rssi_dbm: -75.0,
            confirm_s: 3,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<(), TripsegError> {
        for (name, v) in [("beacon", self.beacon_rssi_dbm), ("wifi", self.wifi_rssi_dbm)] {
            if !(-120.0..=0.0).contains(&v) {
                return Err(TripsegError::InvalidConfig(format!(
                    "{name} RSSI threshold {v} dBm outside [-120, 0]"
                )));
            }
        }
        if self.dwell_s < 1 || self.confirm_s < 1 {
            return Err(TripsegError::InvalidConfig(
                "dwell and confirm times must be at least 1 s".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TripsegError {
    #[error("trip `{trip_id}`: AED `{aed_id}` not in registry")]
    UnknownAed { trip_id: String, aed_id: String },
    #[error("trip `{trip_id}`: no building record for AED `{aed_id}`")]
    UnknownBuilding { trip_id: String, aed_id: String },
    #[error("trip `{trip_id}`: {source}")]
    Pauses {
        trip_id: String,
        #[source]
        source: PauseDetectionError,
    },
    #[error("invalid segmentation config: {0}")]
    InvalidConfig(String),
}

/// Durations of one complete trip in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub prep_ms: i64,
    pub building_search_ms: i64,
    pub indoor_search_ms: i64,
    pub total_ms: i64,
    pub pause_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripPhases {
    pub trip_id: String,
    pub participant_id: String,
    pub session_kind: SessionKind,
    pub guidance: Guidance,
    pub start_t: TimestampMs,
    pub prep_end: TimestampMs,
    pub entry_t: Option<TimestampMs>,
    /// `None` marks an incomplete trip.
    pub arrival_t: Option<TimestampMs>,
    /// Pausing windows that lie inside the trip, merged into `[start, end)` runs.
    pub pause_intervals: Vec<[TimestampMs; 2]>,
    pub warnings: Vec<Warning>,
}

impl TripPhases {
    pub fn is_complete(&self) -> bool {
        self.arrival_t.is_some()
    }

    pub fn durations(&self) -> Option<PhaseDurations> {
        let arrival = self.arrival_t?;
        let entry = self.entry_t.unwrap_or(arrival);
        Some(PhaseDurations {
            prep_ms: self.prep_end - self.start_t,
            building_search_ms: entry - self.prep_end,
            indoor_search_ms: arrival - entry,
            total_ms: arrival - self.start_t,
            pause_ms: self.pause_intervals.iter().map(|[a, b]| b - a).sum(),
        })
    }

    /// Total retrieval duration in seconds.
    pub fn d_t(&self) -> Option<f64> {
        self.durations().map(|d| d.total_ms as f64 / 1000.0)
    }

    /// Total pause duration in seconds.
    pub fn d_p(&self) -> Option<f64> {
        self.durations().map(|d| d.pause_ms as f64 / 1000.0)
    }

    pub fn summary(&self) -> TripSummary {
        let d = self.durations();
        TripSummary {
            trip_id: self.trip_id.clone(),
            participant_id: self.participant_id.clone(),
            session_kind: self.session_kind,
            guidance: self.guidance,
            complete: self.is_complete(),
            start_t: self.start_t,
            prep_end: self.prep_end,
            entry_t: self.entry_t,
            arrival_t: self.arrival_t,
            prep_ms: d.map(|d| d.prep_ms),
            building_search_ms: d.map(|d| d.building_search_ms),
            indoor_search_ms: d.map(|d| d.indoor_search_ms),
            d_t_ms: d.map(|d| d.total_ms),
            d_p_ms: d.map(|d| d.pause_ms),
            n_warnings: self.warnings.len(),
        }
    }

    /// Per-trip JSON document with durations in seconds to one decimal.
    pub fn report(&self) -> TripReport {
        let d = self.durations();
        let s = |ms: i64| (ms as f64 / 100.0).round() / 10.0;
        TripReport {
            trip_id: self.trip_id.clone(),
            participant_id: self.participant_id.clone(),
            session_kind: self.session_kind,
            guidance: self.guidance,
            complete: self.is_complete(),
            boundaries_ms: Boundaries {
                start_t: self.start_t,
                prep_end: self.prep_end,
                entry_t: self.entry_t,
                arrival_t: self.arrival_t,
            },
            durations_s: d.map(|d| DurationsS {
                prep: s(d.prep_ms),
                building_search: s(d.building_search_ms),
                indoor_search: s(d.indoor_search_ms),
                d_t: s(d.total_ms),
                d_p: s(d.pause_ms),
            }),
            pause_intervals: self.pause_intervals.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// One CSV row per trip; empty cells for undefined values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripSummary {
    pub trip_id: String,
    pub participant_id: String,
    pub session_kind: SessionKind,
    pub guidance: Guidance,
    pub complete: bool,
    pub start_t: TimestampMs,
    pub prep_end: TimestampMs,
    pub entry_t: Option<TimestampMs>,
    pub arrival_t: Option<TimestampMs>,
    pub prep_ms: Option<i64>,
    pub building_search_ms: Option<i64>,
    pub indoor_search_ms: Option<i64>,
    pub d_t_ms: Option<i64>,
    pub d_p_ms: Option<i64>,
    pub n_warnings: usize,
}

impl TripSummary {
    pub fn d_t(&self) -> Option<f64> {
        self.d_t_ms.map(|v| v as f64 / 1000.0)
    }

    pub fn d_p(&self) -> Option<f64> {
        self.d_p_ms.map(|v| v as f64 / 1000.0)
    }
}

pub fn summaries_to_csv(rows: &[TripSummary]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    w.into_inner().expect("in-memory CSV flush")
}

pub fn summaries_from_csv(bytes: &[u8]) -> Result<Vec<TripSummary>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub start_t: TimestampMs,
    pub prep_end: TimestampMs,
    pub entry_t: Option<TimestampMs>,
    pub arrival_t: Option<TimestampMs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationsS {
    pub prep: f64,
    pub building_search: f64,
    pub indoor_search: f64,
    pub d_t: f64,
    pub d_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripReport {
    pub trip_id: String,
    pub participant_id: String,
    pub session_kind: SessionKind,
    pub guidance: Guidance,
    pub complete: bool,
    pub boundaries_ms: Boundaries,
    pub durations_s: Option<DurationsS>,
    pub pause_intervals: Vec<[TimestampMs; 2]>,
    pub warnings: Vec<Warning>,
}

/// Segments a trip, classifying its IMU windows with `model`.
pub fn segment(
    log: &SensorLog,
    registry: &Registry,
    model: &PausingModel,
    config: &SegmentConfig,
) -> Result<TripPhases, TripsegError> {
    let windows = classify_windows(&log.streams.accel, &log.streams.gyro, model, log.manifest.start_t)
        .map_err(|source| TripsegError::Pauses {
            trip_id: log.manifest.trip_id.clone(),
            source,
        })?;
    segment_with_windows(log, registry, &windows, config)
}

/// Segmentation from already-classified windows.
pub fn segment_with_windows(
    log: &SensorLog,
    registry: &Registry,
    windows: &[WindowLabel],
    config: &SegmentConfig,
) -> Result<TripPhases, TripsegError> {
    config.validate()?;
    let m = &log.manifest;
    let aed = registry.aed(&m.target_aed).ok_or_else(|| TripsegError::UnknownAed {
        trip_id: m.trip_id.clone(),
        aed_id: m.target_aed.clone(),
    })?;
    let building = registry
        .building(&aed.building_id)
        .ok_or_else(|| TripsegError::UnknownBuilding {
            trip_id: m.trip_id.clone(),
            aed_id: aed.id.clone(),
        })?;
    let mut warnings = log.warnings.clone();

    let mut prep_end = m.start_t;
    if windows.first().is_some_and(|w| w.start_t - m.start_t < WINDOW_MS) {
        for w in windows {
            if w.label != Activity::Pausing || w.start_t != prep_end.max(windows[0].start_t) {
                break;
            }
            prep_end = w.start_t + WINDOW_MS;
        }
    }

    let arrival = detect_arrival(
        &log.streams.beacon,
        &aed.beacon,
        config.beacon_rssi_dbm,
        config.dwell_s,
    );
    let mut entry = detect_entry(
        &log.streams.wifi,
        &building.bssids,
        config.wifi_rssi_dbm,
        config.confirm_s,
    );

    let intervals = match arrival {
        Some(arrival) => {
            if entry.is_none() {
                warnings.push(Warning::new(
                    "no_entry",
                    format!("trip `{}`: no Wi-Fi entry confirmed; entry set to arrival", m.trip_id),
                ));
                entry = Some(arrival);
            }
            prep_end = prep_end.min(arrival);
            entry = entry.map(|e| e.clamp(prep_end, arrival));
            let inside: Vec<WindowLabel> = windows
                .iter()
                .filter(|w| w.start_t >= m.start_t && w.start_t + WINDOW_MS <= arrival)
                .copied()
                .collect();
            pause_intervals(&inside)
        }
        None => {
            warnings.push(Warning::new(
                "incomplete",
                format!("trip `{}`: beacon dwell never satisfied", m.trip_id),
            ));
            entry = entry.map(|e| e.max(prep_end));
            pause_intervals(windows)
        }
    };

    Ok(TripPhases {
        trip_id: m.trip_id.clone(),
        participant_id: m.participant_id.clone(),
        session_kind: m.session_kind,
        guidance: m.guidance,
        start_t: m.start_t,
        prep_end,
        entry_t: entry,
        arrival_t: arrival,
        pause_intervals: intervals,
        warnings,
    })
}
