//! Synthetic, fully labelled retrieval trips.
//!
//! A [`TripScript`] is a sequence of pauses and straight walks in a local
//! metric frame. [`synthesize`] renders it into every sensor stream and a
//! [`TripTruth`] with the exact phase boundaries, and [`synthesize_cohort`]
//! builds paired pre/post scripts for a whole cohort.

mod cohort;
mod geo;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cohort::{
    make_campus, synthesize_cohort, training_corpus, Campus, Cohort, CohortParticipant,
    CohortTruth, ParticipantTruth, ShapeParams, Site,
};
pub use geo::{LocalFrame, EARTH_RADIUS_M};

use crate::sensorlog::{
    Activity, BaroSample, BeaconId, BeaconSighting, GpsFix, Guidance, ImuSample, LabelMark,
    SensorLog, SensorLogError, SensorStreams, SessionKind, TripManifest, WifiScan,
};
use crate::tripseg::ArrivalDetector;
use crate::TimestampMs;

/// Trace-model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub gait_amplitude_g: f64,
    pub step_hz_min: f64,
    pub step_hz_max: f64,
    pub walk_noise_g: f64,
    pub pause_noise_g: f64,
    pub gyro_amplitude_rads: f64,
    pub gyro_walk_noise_rads: f64,
    pub gyro_pause_noise_rads: f64,
    pub gps_sigma_m: f64,
    pub wifi_target_mean_dbm: f64,
    pub wifi_target_sd_dbm: f64,
    pub wifi_street_mean_dbm: f64,
    pub beacon_tx_dbm: f64,
    pub path_loss_exponent: f64,
    pub beacon_sd_dbm: f64,
    pub beacon_range_m: f64,
    /// Beacon check used to place ground-truth arrival on the noise-free trace.
    pub verify_rssi_dbm: f64,
    pub verify_dwell_s: u32,
    /// Seconds spent standing at the AED after reaching it.
    pub tail_s: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gait_amplitude_g: 0.3,
            step_hz_min: 1.8,
            step_hz_max: 2.2,
            walk_noise_g: 0.05,
            pause_noise_g: 0.02,
            gyro_amplitude_rads: 0.6,
            gyro_walk_noise_rads: 0.05,
            gyro_pause_noise_rads: 0.01,
            gps_sigma_m: 3.0,
            wifi_target_mean_dbm: -60.0,
            wifi_target_sd_dbm: 4.0,
            wifi_street_mean_dbm: -72.0,
            beacon_tx_dbm: -59.0,
            path_loss_exponent: 2.2,
            beacon_sd_dbm: 2.0,
            beacon_range_m: 30.0,
            verify_rssi_dbm: -70.0,
            verify_dwell_s: 3,
            tail_s: 8,
        }
    }
}

impl SimConfig {
    /// Noise-free received strength at `d` metres (clamped to 1 m).
    pub fn path_loss_rssi(&self, d: f64) -> f64 {
        self.beacon_tx_dbm - 10.0 * self.path_loss_exponent * d.max(1.0).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Pause,
    Walk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptSegment {
    pub kind: SegmentKind,
    pub duration_s: u32,
    /// Destination of a walk in the local frame; `None` for pauses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<[f64; 2]>,
    pub indoor: bool,
}

impl ScriptSegment {
    pub fn pause(duration_s: u32, indoor: bool) -> Self {
        Self { kind: SegmentKind::Pause, duration_s, to: None, indoor }
    }

    pub fn walk(duration_s: u32, to: [f64; 2], indoor: bool) -> Self {
        Self { kind: SegmentKind::Walk, duration_s, to: Some(to), indoor }
    }
}

/// Everything needed to render one trip deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripScript {
    pub seed: u64,
    pub trip_id: String,
    pub participant_id: String,
    pub session_kind: SessionKind,
    pub guidance: Guidance,
    pub target_aed: String,
    pub start_t: TimestampMs,
    pub frame: LocalFrame,
    pub origin: [f64; 2],
    pub aed_position: [f64; 2],
    pub beacon: BeaconId,
    pub building_bssids: Vec<String>,
    /// Outdoor segments followed by indoor segments; the last walk ends at the AED.
    pub segments: Vec<ScriptSegment>,
}

impl TripScript {
    /// Seconds from start until the first indoor segment.
    pub fn entry_s(&self) -> Option<u32> {
        let mut t = 0;
        for s in &self.segments {
            if s.indoor {
                return Some(t);
            }
            t += s.duration_s;
        }
        None
    }

    /// Seconds from start until the last walk reaches the AED.
    pub fn reach_s(&self) -> u32 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScript { trip_id: self.trip_id.clone(), reason: m });
        if self.segments.is_empty() {
            return bad("no segments".into());
        }
        let mut indoor = false;
        let mut pos = self.origin;
        for (i, s) in self.segments.iter().enumerate() {
            if s.duration_s == 0 {
                return bad(format!("segment {i} has zero duration"));
            }
            match (s.kind, s.to) {
                (SegmentKind::Walk, Some(to)) => pos = to,
                (SegmentKind::Walk, None) => return bad(format!("walk {i} has no destination")),
                (SegmentKind::Pause, Some(_)) => return bad(format!("pause {i} has a destination")),
                (SegmentKind::Pause, None) => {}
            }
            if indoor && !s.indoor {
                return bad(format!("segment {i} leaves the building"));
            }
            indoor |= s.indoor;
        }
        if !indoor {
            return bad("building entry never happens before arrival".into());
        }
        if geo::dist(pos, self.aed_position) > 1.0 {
            return bad("final walk does not end at the AED".into());
        }
        Ok(())
    }
}

/// Ground truth derived from a script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripTruth {
    pub trip_id: String,
    pub participant_id: String,
    pub session_kind: SessionKind,
    pub guidance: Guidance,
    pub start_t: TimestampMs,
    pub prep_end: TimestampMs,
    pub entry_t: TimestampMs,
    /// Moment the walker reaches the AED.
    pub reach_t: TimestampMs,
    /// Beacon dwell completion on the noise-free trace.
    pub arrival_t: TimestampMs,
    pub end_t: TimestampMs,
    /// Scripted pauses (including the final stand at the AED), `[start, end)` ms.
    pub pause_intervals: Vec<[TimestampMs; 2]>,
    pub d_t_s: f64,
    /// Scripted pause time before arrival.
    pub d_p_s: f64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid script `{trip_id}`: {reason}")]
    InvalidScript { trip_id: String, reason: String },
    #[error("trip `{0}`: beacon dwell is never met on the noise-free trace")]
    NoArrival(String),
    #[error("invalid cohort request: {0}")]
    InvalidCohort(String),
    #[error(transparent)]
    Write(#[from] SensorLogError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A rendered trip.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrip {
    pub log: SensorLog,
    pub truth: TripTruth,
}

struct Piece {
    t0: f64,
    t1: f64,
    from: [f64; 2],
    to: [f64; 2],
    walking: bool,
    indoor: bool,
    step_hz: f64,
}

struct Timeline {
    pieces: Vec<Piece>,
    total_s: f64,
}

impl Timeline {
    fn build(script: &TripScript, tail_s: u32, step_hz: &[f64]) -> Self {
        let mut pieces = Vec::new();
        let (mut t, mut pos) = (0.0, script.origin);
        let mut walk_idx = 0;
        for s in &script.segments {
            let t1 = t + f64::from(s.duration_s);
            let (to, walking, hz) = match s.kind {
                SegmentKind::Walk => {
                    walk_idx += 1;
                    (s.to.expect("validated"), true, step_hz[walk_idx - 1])
                }
                SegmentKind::Pause => (pos, false, 0.0),
            };
            pieces.push(Piece { t0: t, t1, from: pos, to, walking, indoor: s.indoor, step_hz: hz });
            pos = to;
            t = t1;
        }
        let t1 = t + f64::from(tail_s);
        pieces.push(Piece { t0: t, t1, from: pos, to: pos, walking: false, indoor: true, step_hz: 0.0 });
        Self { pieces, total_s: t1 }
    }

    fn at(&self, t: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.t1 <= t);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }

    fn position(&self, t: f64) -> [f64; 2] {
        let p = self.at(t);
        let u = if p.t1 > p.t0 { ((t - p.t0) / (p.t1 - p.t0)).clamp(0.0, 1.0) } else { 1.0 };
        geo::lerp(p.from, p.to, u)
    }
}

fn ms(start: TimestampMs, s: f64) -> TimestampMs {
    start + (s * 1000.0).round() as TimestampMs
}

fn noise_free_arrival(script: &TripScript, timeline: &Timeline, cfg: &SimConfig) -> Option<TimestampMs> {
    let mut det = ArrivalDetector::new(script.beacon.clone(), cfg.verify_rssi_dbm, cfg.verify_dwell_s);
    let total = timeline.total_s as i64;
    (0..=total).find_map(|k| {
        let d = geo::dist(timeline.position(k as f64), script.aed_position);
        (d <= cfg.beacon_range_m)
            .then(|| {
                det.feed(&BeaconSighting {
                    t: ms(script.start_t, k as f64),
                    beacon: script.beacon.clone(),
                    rssi_dbm: cfg.path_loss_rssi(d).round(),
                })
            })
            .flatten()
    })
}

fn truth_of(script: &TripScript, timeline: &Timeline, cfg: &SimConfig) -> Result<TripTruth, SimError> {
    let start = script.start_t;
    let arrival = noise_free_arrival(script, timeline, cfg)
        .ok_or_else(|| SimError::NoArrival(script.trip_id.clone()))?;
    let prep_s = match script.segments.first() {
        Some(s) if s.kind == SegmentKind::Pause && !s.indoor => s.duration_s,
        _ => 0,
    };
    let pause_intervals: Vec<[TimestampMs; 2]> = timeline
        .pieces
        .iter()
        .filter(|p| !p.walking && p.t1 > p.t0)
        .map(|p| [ms(start, p.t0), ms(start, p.t1)])
        .collect();
    let d_p_ms: i64 = pause_intervals
        .iter()
        .map(|[a, b]| (b.min(&arrival) - a).max(0))
        .sum();
    Ok(TripTruth {
        trip_id: script.trip_id.clone(),
        participant_id: script.participant_id.clone(),
        session_kind: script.session_kind,
        guidance: script.guidance,
        start_t: start,
        prep_end: start + i64::from(prep_s) * 1000,
        entry_t: start + i64::from(script.entry_s().expect("validated")) * 1000,
        reach_t: start + i64::from(script.reach_s()) * 1000,
        arrival_t: arrival,
        end_t: ms(start, timeline.total_s),
        pause_intervals,
        d_t_s: (arrival - start) as f64 / 1000.0,
        d_p_s: d_p_ms as f64 / 1000.0,
    })
}

/// Ground truth of a script without rendering any stream.
pub fn script_truth(script: &TripScript, cfg: &SimConfig) -> Result<TripTruth, SimError> {
    script.validate()?;
    let hz = vec![cfg.step_hz_min; script.segments.len()];
    truth_of(script, &Timeline::build(script, cfg.tail_s, &hz), cfg)
}

/// Renders every sensor stream of `script`. All randomness comes from
/// `ChaCha8Rng` seeded with `script.seed`.
pub fn synthesize(script: &TripScript, cfg: &SimConfig) -> Result<SimTrip, SimError> {
    script.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let n_walks = script.segments.iter().filter(|s| s.kind == SegmentKind::Walk).count();
    let hz_dist = Uniform::new_inclusive(cfg.step_hz_min, cfg.step_hz_max).expect("valid step range");
    let step_hz: Vec<f64> = (0..n_walks).map(|_| hz_dist.sample(&mut rng)).collect();
    let timeline = Timeline::build(script, cfg.tail_s, &step_hz);
    let truth = truth_of(script, &timeline, cfg)?;
    let start = script.start_t;
    let total_ms = (timeline.total_s * 1000.0).round() as i64;
    let gauss = |sd: f64| Normal::new(0.0, sd).expect("non-negative sd");
    let tau = std::f64::consts::TAU;

    let (walk_n, pause_n) = (gauss(cfg.walk_noise_g), gauss(cfg.pause_noise_g));
    let mut accel = Vec::with_capacity(total_ms as usize / 10 + 1);
    for k in 0..=total_ms / 10 {
        let t = k as f64 / 100.0;
        let p = timeline.at(t);
        let s = if p.walking {
            let ph = tau * p.step_hz * t;
            [
                0.08 * (ph + 0.7).sin() + walk_n.sample(&mut rng),
                0.05 * (ph / 2.0).sin() + walk_n.sample(&mut rng),
                1.0 + cfg.gait_amplitude_g * ph.sin() + walk_n.sample(&mut rng),
            ]
        } else {
            [pause_n.sample(&mut rng), pause_n.sample(&mut rng), 1.0 + pause_n.sample(&mut rng)]
        };
        accel.push(ImuSample { t: start + k * 10, x: s[0], y: s[1], z: s[2] });
    }

    let (gw, gp) = (gauss(cfg.gyro_walk_noise_rads), gauss(cfg.gyro_pause_noise_rads));
    let amp = cfg.gyro_amplitude_rads;
    let mut gyro = Vec::with_capacity(accel.len());
    for k in 0..=total_ms / 10 {
        let t = k as f64 / 100.0;
        let p = timeline.at(t);
        let s = if p.walking {
            let ph = tau * p.step_hz * t;
            [
                amp * (ph / 2.0).sin() + gw.sample(&mut rng),
                0.5 * amp * (ph + 1.0).sin() + gw.sample(&mut rng),
                0.3 * amp * (ph / 2.0 + 0.3).sin() + gw.sample(&mut rng),
            ]
        } else {
            [gp.sample(&mut rng), gp.sample(&mut rng), gp.sample(&mut rng)]
        };
        gyro.push(ImuSample { t: start + k * 10, x: s[0], y: s[1], z: s[2] });
    }

    let seconds = 0..=total_ms / 1000;
    let gps_n = gauss(cfg.gps_sigma_m);
    let gps = seconds
        .clone()
        .map(|k| {
            let t = k as f64;
            let p = timeline.position(t);
            let g = script
                .frame
                .to_geo([p[0] + gps_n.sample(&mut rng), p[1] + gps_n.sample(&mut rng)]);
            let indoor = timeline.at(t).indoor;
            GpsFix { t: start + k * 1000, lat: g.lat, lon: g.lon, acc_m: if indoor { 20.0 } else { 5.0 } }
        })
        .collect();

    let wifi_target = gauss(cfg.wifi_target_sd_dbm);
    let mut wifi = Vec::new();
    for k in seconds.clone() {
        let t = start + k * 1000;
        wifi.push(WifiScan {
            t,
            bssid: "02:00:5e:00:ff:01".into(),
            rssi_dbm: (cfg.wifi_street_mean_dbm + wifi_target.sample(&mut rng)).round(),
        });
        if t >= truth.entry_t {
            for b in &script.building_bssids {
                wifi.push(WifiScan {
                    t,
                    bssid: b.clone(),
                    rssi_dbm: (cfg.wifi_target_mean_dbm + wifi_target.sample(&mut rng)).round(),
                });
            }
        }
    }

    let baro_n = gauss(0.03);
    let baro = seconds
        .clone()
        .map(|k| BaroSample { t: start + k * 1000, hpa: 1013.25 + baro_n.sample(&mut rng) })
        .collect();

    let beacon_n = gauss(cfg.beacon_sd_dbm);
    let mut beacon = Vec::new();
    for k in seconds.clone() {
        let d = geo::dist(timeline.position(k as f64), script.aed_position);
        if d <= cfg.beacon_range_m {
            beacon.push(BeaconSighting {
                t: start + k * 1000,
                beacon: script.beacon.clone(),
                rssi_dbm: (cfg.path_loss_rssi(d) + beacon_n.sample(&mut rng)).round(),
            });
        }
    }

    let labels = seconds
        .take((total_ms / 1000) as usize)
        .map(|k| LabelMark {
            t: start + k * 1000,
            label: if timeline.at(k as f64 + 0.5).walking { Activity::Moving } else { Activity::Pausing },
        })
        .collect();

    let log = SensorLog {
        manifest: TripManifest {
            trip_id: script.trip_id.clone(),
            participant_id: script.participant_id.clone(),
            session_kind: script.session_kind,
            target_aed: script.target_aed.clone(),
            guidance: script.guidance,
            start_t: start,
        },
        streams: SensorStreams { accel, gyro, gps, wifi, baro, beacon, labels: Some(labels) },
        warnings: Vec::new(),
    };
    Ok(SimTrip { log, truth })
}

/// Renders `script` into `dir`: manifest, streams, `labels.csv`, `truth.json`
/// and `script.json`.
pub fn write_trip(dir: &Path, script: &TripScript, cfg: &SimConfig) -> Result<TripTruth, SimError> {
    let trip = synthesize(script, cfg)?;
    std::fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.to_path_buf(), source })?;
    trip.log.write_to_dir(dir)?;
    for (name, value) in [
        ("truth.json", serde_json::to_value(&trip.truth)),
        ("script.json", serde_json::to_value(script)),
    ] {
        let path = dir.join(name);
        crate::io::write_json(&path, &value.expect("serializable"))
            .map_err(|source| SimError::Io { path, source })?;
    }
    Ok(trip.truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorlog::GeoPoint;

    fn script(segments: Vec<ScriptSegment>) -> TripScript {
        TripScript {
            seed: 11,
            trip_id: "t".into(),
            participant_id: "p".into(),
            session_kind: SessionKind::PreExam,
            guidance: Guidance::Map,
            target_aed: "A".into(),
            start_t: 1_000_000,
            frame: LocalFrame::new(GeoPoint::new(35.0, 135.0)),
            origin: [0.0, 0.0],
            aed_position: [60.0, 0.0],
            beacon: BeaconId { uuid: "U".into(), major: 1, minor: 1 },
            building_bssids: vec!["aa".into()],
            segments,
        }
    }

    /// walk 30 s, stand 10 s, walk 20 s (last 10 s indoors)
    fn walk_pause_walk() -> TripScript {
        script(vec![
            ScriptSegment::walk(30, [42.0, 0.0], false),
            ScriptSegment::pause(10, false),
            ScriptSegment::walk(4, [47.6, 0.0], false),
            ScriptSegment::walk(16, [60.0, 0.0], true),
        ])
    }

    #[test]
    fn labels_mirror_script() {
        let trip = synthesize(&walk_pause_walk(), &SimConfig::default()).unwrap();
        let labels = trip.log.streams.labels.unwrap();
        for m in &labels {
            let s = (m.t - 1_000_000) / 1000;
            let want = if (30..40).contains(&s) || s >= 60 { Activity::Pausing } else { Activity::Moving };
            assert_eq!(m.label, want, "second {s}");
        }
        assert_eq!(labels.len(), 68);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = synthesize(&walk_pause_walk(), &SimConfig::default()).unwrap();
        let b = synthesize(&walk_pause_walk(), &SimConfig::default()).unwrap();
        assert_eq!(a.log.streams.to_csv_files(), b.log.streams.to_csv_files());
    }

    #[test]
    fn path_loss_at_one_metre() {
        assert_eq!(SimConfig::default().path_loss_rssi(1.0), -59.0);
        assert_eq!(SimConfig::default().path_loss_rssi(0.2), -59.0);
    }

    #[test]
    fn truth_boundaries() {
        let t = synthesize(&walk_pause_walk(), &SimConfig::default()).unwrap().truth;
        assert_eq!(t.prep_end, t.start_t);
        assert_eq!(t.entry_t - t.start_t, 44_000);
        assert_eq!(t.reach_t - t.start_t, 60_000);
        // 3.1 m away at 56 s rounds to -70 dBm; 56, 57, 58 complete the dwell
        assert_eq!(t.arrival_t - t.start_t, 58_000);
        assert_eq!(t.d_p_s, 10.0);
    }

    #[test]
    fn outdoor_only_script_is_rejected() {
        let s = script(vec![ScriptSegment::walk(40, [60.0, 0.0], false)]);
        assert!(matches!(synthesize(&s, &SimConfig::default()), Err(SimError::InvalidScript { .. })));
    }

    #[test]
    fn leaving_the_building_is_rejected() {
        let s = script(vec![
            ScriptSegment::walk(20, [30.0, 0.0], true),
            ScriptSegment::walk(20, [60.0, 0.0], false),
        ]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn streams_meet_nominal_rates() {
        let trip = synthesize(&walk_pause_walk(), &SimConfig::default()).unwrap();
        let s = &trip.log.streams;
        assert_eq!(s.accel.len(), 6801);
        assert_eq!(s.accel[1].t - s.accel[0].t, 10);
        assert_eq!(s.gps.len(), 69);
        assert!(s.beacon.iter().all(|b| b.t >= 1_000_000));
    }
}
