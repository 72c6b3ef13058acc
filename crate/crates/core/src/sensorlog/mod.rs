//! Data model and file ingestion for trip sensor logs.
//!
//! A trip lives in one directory holding a `manifest.json` and one CSV file per
//! stream (see [`StreamKind`] for the exact headers). Streams are sorted by
//! timestamp on load and duplicate readings are collapsed keep-first. Rate
//! deviations from the nominal sampling rate are reported as warnings, never
//! as errors.

mod registry;
mod survey;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{TimestampMs, Warning};

pub use registry::{load_registry, AedRecord, BuildingRecord, GeoPoint, Registry, RegistryError};
pub use survey::{validate_survey, SurveyError, SurveyResponse};

/// Ground-truth or predicted activity of a 2 s window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Moving,
    Pausing,
}

impl Activity {
    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Moving => "moving",
            Activity::Pausing => "pausing",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    PreExam,
    PostExam1,
    PostExam2,
    Routine,
}

impl SessionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionKind::PreExam => "pre_exam",
            SessionKind::PostExam1 => "post_exam_1",
            SessionKind::PostExam2 => "post_exam_2",
            SessionKind::Routine => "routine",
        }
    }

    pub fn is_exam(self) -> bool {
        !matches!(self, SessionKind::Routine)
    }
}

impl fmt::Display for SessionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether the participant had map guidance during the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guidance {
    Map,
    NoMap,
}

impl Guidance {
    pub fn as_str(self) -> &'static str {
        match self {
            Guidance::Map => "map",
            Guidance::NoMap => "no_map",
        }
    }
}

impl fmt::Display for Guidance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// iBeacon identity (proximity UUID plus major/minor).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeaconId {
    pub uuid: String,
    pub major: u16,
    pub minor: u16,
}

impl fmt::Display for BeaconId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.uuid, self.major, self.minor)
    }
}

/// Triaxial IMU reading. Accelerometer axes are in g, gyroscope axes in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: TimestampMs,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: TimestampMs,
    pub lat: f64,
    pub lon: f64,
    pub acc_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiScan {
    pub t: TimestampMs,
    pub bssid: String,
    pub rssi_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaroSample {
    pub t: TimestampMs,
    pub hpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconSighting {
    pub t: TimestampMs,
    pub beacon: BeaconId,
    pub rssi_dbm: f64,
}

/// One per-second ground-truth annotation; it holds until the next mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMark {
    pub t: TimestampMs,
    pub label: Activity,
}

/// Per-trip metadata, stored as `manifest.json` next to the streams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripManifest {
    pub trip_id: String,
    pub participant_id: String,
    pub session_kind: SessionKind,
    pub target_aed: String,
    pub guidance: Guidance,
    pub start_t: TimestampMs,
}

impl TripManifest {
    pub fn load(path: &Path) -> Result<Self, SensorLogError> {
        let text = read_file(path)?;
        serde_json::from_str(&text).map_err(|source| SensorLogError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// All streams of one trip, each sorted by timestamp.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorStreams {
    pub accel: Vec<ImuSample>,
    pub gyro: Vec<ImuSample>,
    pub gps: Vec<GpsFix>,
    pub wifi: Vec<WifiScan>,
    pub baro: Vec<BaroSample>,
    pub beacon: Vec<BeaconSighting>,
    pub labels: Option<Vec<LabelMark>>,
}

/// A loaded trip: manifest, streams and ingestion warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLog {
    pub manifest: TripManifest,
    pub streams: SensorStreams,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Accel,
    Gyro,
    Gps,
    Wifi,
    Baro,
    Beacon,
    Labels,
}

impl StreamKind {
    pub const REQUIRED: [StreamKind; 6] = [
        StreamKind::Accel,
        StreamKind::Gyro,
        StreamKind::Gps,
        StreamKind::Wifi,
        StreamKind::Baro,
        StreamKind::Beacon,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            StreamKind::Accel => "accel.csv",
            StreamKind::Gyro => "gyro.csv",
            StreamKind::Gps => "gps.csv",
            StreamKind::Wifi => "wifi.csv",
            StreamKind::Baro => "baro.csv",
            StreamKind::Beacon => "beacon.csv",
            StreamKind::Labels => "labels.csv",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            StreamKind::Accel => &["t_ms", "x_g", "y_g", "z_g"],
            StreamKind::Gyro => &["t_ms", "x_rads", "y_rads", "z_rads"],
            StreamKind::Gps => &["t_ms", "lat", "lon", "acc_m"],
            StreamKind::Wifi => &["t_ms", "bssid", "rssi_dbm"],
            StreamKind::Baro => &["t_ms", "hpa"],
            StreamKind::Beacon => &["t_ms", "uuid", "major", "minor", "rssi_dbm"],
            StreamKind::Labels => &["t_ms", "label"],
        }
    }

    /// Nominal sampling rate in Hz.
    pub fn nominal_hz(self) -> f64 {
        match self {
            StreamKind::Accel | StreamKind::Gyro => 100.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_name().trim_end_matches(".csv"))
    }
}

/// Relative tolerance on the nominal sampling rate.
pub const RATE_TOLERANCE: f64 = 0.20;

#[derive(Debug, Error)]
pub enum SensorLogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: malformed row: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("trip {trip_id} targets unknown AED `{aed_id}`")]
    UnknownAed { trip_id: String, aed_id: String },
    #[error("{stream} stream starts at {first_t} ms, before trip start {start_t} ms")]
    BeforeStart {
        stream: StreamKind,
        first_t: TimestampMs,
        start_t: TimestampMs,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn read_file(path: &Path) -> Result<String, SensorLogError> {
    fs::read_to_string(path).map_err(|source| SensorLogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// CSV row layouts. Field order matches the headers in `StreamKind::header`.

#[derive(Serialize, Deserialize)]
struct ImuRow(TimestampMs, f64, f64, f64);

#[derive(Serialize, Deserialize)]
struct GpsRow(TimestampMs, f64, f64, f64);

#[derive(Serialize, Deserialize)]
struct WifiRow(TimestampMs, String, f64);

#[derive(Serialize, Deserialize)]
struct BaroRow(TimestampMs, f64);

#[derive(Serialize, Deserialize)]
struct BeaconRow(TimestampMs, String, u16, u16, f64);

#[derive(Serialize, Deserialize)]
struct LabelRow(TimestampMs, Activity);

trait Reading {
    fn t(&self) -> TimestampMs;

    /// Two readings are duplicates when they share a timestamp and, for
    /// multi-source streams, the same source.
    fn duplicates(&self, other: &Self) -> bool {
        self.t() == other.t()
    }
}

impl Reading for ImuSample {
    fn t(&self) -> TimestampMs {
        self.t
    }
}

impl Reading for GpsFix {
    fn t(&self) -> TimestampMs {
        self.t
    }
}

impl Reading for BaroSample {
    fn t(&self) -> TimestampMs {
        self.t
    }
}

impl Reading for LabelMark {
    fn t(&self) -> TimestampMs {
        self.t
    }
}

impl Reading for WifiScan {
    fn t(&self) -> TimestampMs {
        self.t
    }

    fn duplicates(&self, other: &Self) -> bool {
        self.t == other.t && self.bssid == other.bssid
    }
}

impl Reading for BeaconSighting {
    fn t(&self) -> TimestampMs {
        self.t
    }

    fn duplicates(&self, other: &Self) -> bool {
        self.t == other.t && self.beacon == other.beacon
    }
}

fn read_stream<R, T>(
    path: &Path,
    kind: StreamKind,
    convert: impl Fn(R) -> T,
) -> Result<Vec<T>, SensorLogError>
where
    R: DeserializeOwned,
{
    let text = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SensorLogError::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = kind.header();
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(SensorLogError::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for record in reader.deserialize::<R>() {
        let row = record.map_err(|e| SensorLogError::MalformedRow {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        out.push(convert(row));
    }
    Ok(out)
}

/// Sorts (stable) and collapses duplicates keep-first, returning the warnings
/// produced along the way.
fn normalise<T: Reading>(kind: StreamKind, mut samples: Vec<T>) -> (Vec<T>, Vec<Warning>) {
    let mut warnings = Vec::new();
    if samples.windows(2).any(|w| w[1].t() < w[0].t()) {
        samples.sort_by_key(Reading::t);
        warnings.push(Warning::new(
            "reordered",
            format!("{kind} stream had out-of-order rows; sorted by timestamp"),
        ));
    }
    let before = samples.len();
    let mut out: Vec<T> = Vec::with_capacity(samples.len());
    let mut group_start = 0;
    for sample in samples {
        if out.last().is_some_and(|last| last.t() != sample.t()) {
            group_start = out.len();
        }
        if out[group_start..].iter().any(|kept| kept.duplicates(&sample)) {
            continue;
        }
        out.push(sample);
    }
    if out.len() < before {
        warnings.push(Warning::new(
            "duplicates",
            format!(
                "{kind} stream: {} duplicate readings collapsed (kept first)",
                before - out.len()
            ),
        ));
    }
    (out, warnings)
}

/// Effective rate from the median spacing of distinct timestamps. Gaps (for
/// example a beacon leaving radio range) do not move the median.
pub fn effective_rate_hz(timestamps: &[TimestampMs]) -> Option<f64> {
    let mut distinct: Vec<TimestampMs> = timestamps.to_vec();
    distinct.dedup();
    if distinct.len() < 2 {
        return None;
    }
    let mut gaps: Vec<TimestampMs> = distinct.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_unstable();
    let mid = gaps.len() / 2;
    let median = if gaps.len() % 2 == 1 {
        gaps[mid] as f64
    } else {
        (gaps[mid - 1] + gaps[mid]) as f64 / 2.0
    };
    (median > 0.0).then(|| 1000.0 / median)
}

fn check_rate(kind: StreamKind, timestamps: &[TimestampMs]) -> Option<Warning> {
    let rate = effective_rate_hz(timestamps)?;
    let nominal = kind.nominal_hz();
    if (rate - nominal).abs() > RATE_TOLERANCE * nominal {
        Some(Warning::new(
            "rate",
            format!("{kind} stream runs at {rate:.2} Hz, nominal {nominal} Hz (±20%)"),
        ))
    } else {
        None
    }
}

fn ingest<R, T>(
    dir: &Path,
    kind: StreamKind,
    start_t: TimestampMs,
    warnings: &mut Vec<Warning>,
    convert: impl Fn(R) -> T,
) -> Result<Vec<T>, SensorLogError>
where
    R: DeserializeOwned,
    T: Reading,
{
    let raw = read_stream(&dir.join(kind.file_name()), kind, convert)?;
    let (samples, mut found) = normalise(kind, raw);
    if let Some(first) = samples.first() {
        if first.t() < start_t {
            return Err(SensorLogError::BeforeStart {
                stream: kind,
                first_t: first.t(),
                start_t,
            });
        }
    }
    let ts: Vec<TimestampMs> = samples.iter().map(Reading::t).collect();
    found.extend(check_rate(kind, &ts));
    warnings.extend(found);
    Ok(samples)
}

/// Loads a trip from `manifest_path`, reading its streams from `data_dir`.
///
/// The six sensor streams are required; `labels.csv` is optional. The target
/// AED must exist in `registry`.
pub fn load_trip(
    manifest_path: &Path,
    data_dir: &Path,
    registry: &Registry,
) -> Result<SensorLog, SensorLogError> {
    let manifest = TripManifest::load(manifest_path)?;
    if registry.aed(&manifest.target_aed).is_none() {
        return Err(SensorLogError::UnknownAed {
            trip_id: manifest.trip_id.clone(),
            aed_id: manifest.target_aed.clone(),
        });
    }
    let start = manifest.start_t;
    let mut warnings = Vec::new();
    let imu = |r: ImuRow| ImuSample {
        t: r.0,
        x: r.1,
        y: r.2,
        z: r.3,
    };
    let accel = ingest(data_dir, StreamKind::Accel, start, &mut warnings, imu)?;
    let gyro = ingest(data_dir, StreamKind::Gyro, start, &mut warnings, imu)?;
    let gps = ingest(data_dir, StreamKind::Gps, start, &mut warnings, |r: GpsRow| {
        GpsFix {
            t: r.0,
            lat: r.1,
            lon: r.2,
            acc_m: r.3,
        }
    })?;
    let wifi = ingest(data_dir, StreamKind::Wifi, start, &mut warnings, |r: WifiRow| {
        WifiScan {
            t: r.0,
            bssid: r.1,
            rssi_dbm: r.2,
        }
    })?;
    let baro = ingest(data_dir, StreamKind::Baro, start, &mut warnings, |r: BaroRow| {
        BaroSample { t: r.0, hpa: r.1 }
    })?;
    let beacon = ingest(
        data_dir,
        StreamKind::Beacon,
        start,
        &mut warnings,
        |r: BeaconRow| BeaconSighting {
            t: r.0,
            beacon: BeaconId {
                uuid: r.1,
                major: r.2,
                minor: r.3,
            },
            rssi_dbm: r.4,
        },
    )?;
    let labels = if data_dir.join(StreamKind::Labels.file_name()).exists() {
        Some(ingest(
            data_dir,
            StreamKind::Labels,
            start,
            &mut warnings,
            |r: LabelRow| LabelMark {
                t: r.0,
                label: r.1,
            },
        )?)
    } else {
        None
    };
    Ok(SensorLog {
        manifest,
        streams: SensorStreams {
            accel,
            gyro,
            gps,
            wifi,
            baro,
            beacon,
            labels,
        },
        warnings,
    })
}

fn stream_csv<T: Serialize>(kind: StreamKind, rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(kind.header())
        .expect("writing to memory cannot fail");
    for row in rows {
        writer.serialize(row).expect("writing to memory cannot fail");
    }
    writer.into_inner().expect("writing to memory cannot fail")
}

impl SensorStreams {
    /// Renders every present stream as `(file name, CSV bytes)`.
    pub fn to_csv_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let imu = |s: &ImuSample| ImuRow(s.t, s.x, s.y, s.z);
        let mut files = vec![
            (
                StreamKind::Accel.file_name(),
                stream_csv(StreamKind::Accel, self.accel.iter().map(imu)),
            ),
            (
                StreamKind::Gyro.file_name(),
                stream_csv(StreamKind::Gyro, self.gyro.iter().map(imu)),
            ),
            (
                StreamKind::Gps.file_name(),
                stream_csv(
                    StreamKind::Gps,
                    self.gps.iter().map(|g| GpsRow(g.t, g.lat, g.lon, g.acc_m)),
                ),
            ),
            (
                StreamKind::Wifi.file_name(),
                stream_csv(
                    StreamKind::Wifi,
                    self.wifi
                        .iter()
                        .map(|w| WifiRow(w.t, w.bssid.clone(), w.rssi_dbm)),
                ),
            ),
            (
                StreamKind::Baro.file_name(),
                stream_csv(
                    StreamKind::Baro,
                    self.baro.iter().map(|b| BaroRow(b.t, b.hpa)),
                ),
            ),
            (
                StreamKind::Beacon.file_name(),
                stream_csv(
                    StreamKind::Beacon,
                    self.beacon.iter().map(|b| {
                        BeaconRow(
                            b.t,
                            b.beacon.uuid.clone(),
                            b.beacon.major,
                            b.beacon.minor,
                            b.rssi_dbm,
                        )
                    }),
                ),
            ),
        ];
        if let Some(labels) = &self.labels {
            files.push((
                StreamKind::Labels.file_name(),
                stream_csv(
                    StreamKind::Labels,
                    labels.iter().map(|l| LabelRow(l.t, l.label)),
                ),
            ));
        }
        files
    }
}

impl SensorLog {
    /// Writes `manifest.json` and every stream into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SensorLogError> {
        let write_err = |path: PathBuf| move |source| SensorLogError::Write { path, source };
        let manifest_path = dir.join("manifest.json");
        crate::io::write_json(&manifest_path, &self.manifest)
            .map_err(write_err(manifest_path.clone()))?;
        for (name, bytes) in self.streams.to_csv_files() {
            let path = dir.join(name);
            crate::io::write_atomic(&path, &bytes).map_err(write_err(path.clone()))?;
        }
        Ok(())
    }

    /// Distinct BSSIDs seen during the trip.
    pub fn seen_bssids(&self) -> HashSet<&str> {
        self.streams.wifi.iter().map(|w| w.bssid.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> Registry {
        serde_json::from_str(
            r#"{
              "aeds": [{"id": "AED-1", "name": "Library", "lat": 35.0, "lon": 135.0,
                        "floor": "2F", "building_id": "B1",
                        "beacon": {"uuid": "u", "major": 1, "minor": 1}}],
              "buildings": [{"building_id": "B1", "bssids": ["aa"],
                             "entry_point": {"lat": 35.0, "lon": 135.0}}]
            }"#,
        )
        .unwrap()
    }

    fn write_minimal_trip(dir: &Path, target: &str, accel_body: &str) {
        let manifest = format!(
            r#"{{"trip_id":"T1","participant_id":"P1","session_kind":"pre_exam",
                "target_aed":"{target}","guidance":"map","start_t":1000}}"#
        );
        fs::write(dir.join("manifest.json"), manifest).unwrap();
        fs::write(dir.join("accel.csv"), format!("t_ms,x_g,y_g,z_g\n{accel_body}")).unwrap();
        fs::write(dir.join("gyro.csv"), "t_ms,x_rads,y_rads,z_rads\n1000,0,0,0\n1010,0,0,0\n")
            .unwrap();
        fs::write(dir.join("gps.csv"), "t_ms,lat,lon,acc_m\n1000,35,135,3\n2000,35,135,3\n")
            .unwrap();
        fs::write(dir.join("wifi.csv"), "t_ms,bssid,rssi_dbm\n1000,aa,-60\n1000,bb,-70\n").unwrap();
        fs::write(dir.join("baro.csv"), "t_ms,hpa\n1000,1013.2\n2000,1013.1\n").unwrap();
        fs::write(
            dir.join("beacon.csv"),
            "t_ms,uuid,major,minor,rssi_dbm\n1000,u,1,1,-70\n2000,u,1,1,-69\n",
        )
        .unwrap();
    }

    #[test]
    fn loads_six_streams() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-1", "1000,0,0,1\n1010,0,0,1\n1020,0,0,1\n");
        let log = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap();
        let s = &log.streams;
        assert!(!s.accel.is_empty() && !s.gyro.is_empty() && !s.gps.is_empty());
        assert!(!s.wifi.is_empty() && !s.baro.is_empty() && !s.beacon.is_empty());
        assert!(s.labels.is_none());
        // Two BSSIDs in the same scan are not duplicates.
        assert_eq!(s.wifi.len(), 2);
        assert!(log.warnings.is_empty(), "{:?}", log.warnings);
    }

    #[test]
    fn out_of_order_rows_are_sorted_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-1", "1020,0,0,3\n1000,0,0,1\n1010,0,0,2\n");
        let log = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap();
        let zs: Vec<f64> = log.streams.accel.iter().map(|s| s.z).collect();
        assert_eq!(zs, vec![1.0, 2.0, 3.0]);
        assert!(log.warnings.iter().any(|w| w.code == "reordered"));
    }

    #[test]
    fn duplicate_timestamps_keep_first() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-1", "1000,0,0,1\n1010,0,0,7\n1010,0,0,9\n1020,0,0,1\n");
        let log = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap();
        assert_eq!(log.streams.accel.len(), 3);
        assert_eq!(log.streams.accel[1].z, 7.0);
        assert!(log.warnings.iter().any(|w| w.code == "duplicates"));
    }

    #[test]
    fn unknown_aed_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-404", "1000,0,0,1\n1010,0,0,1\n");
        let err = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap_err();
        assert!(matches!(err, SensorLogError::UnknownAed { .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-1", "1000,0,0,1\n1010,zero,0,1\n");
        let err = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap_err();
        match err {
            SensorLogError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_stream_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-1", "1000,0,0,1\n");
        fs::remove_file(dir.path().join("baro.csv")).unwrap();
        let err = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap_err();
        assert!(matches!(err, SensorLogError::Io { .. }));
    }

    #[test]
    fn rate_violation_is_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        // 50 Hz accelerometer.
        write_minimal_trip(dir.path(), "AED-1", "1000,0,0,1\n1020,0,0,1\n1040,0,0,1\n");
        let log = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap();
        assert!(log.warnings.iter().any(|w| w.code == "rate"));
    }

    #[test]
    fn sample_before_start_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-1", "990,0,0,1\n1000,0,0,1\n");
        let err = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap_err();
        assert!(matches!(err, SensorLogError::BeforeStart { .. }));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal_trip(dir.path(), "AED-1", "1000,0,0,1\n");
        fs::write(dir.path().join("baro.csv"), "t,pressure\n1000,1013\n").unwrap();
        let err = load_trip(&dir.path().join("manifest.json"), dir.path(), &registry()).unwrap_err();
        assert!(matches!(err, SensorLogError::Header { .. }));
    }

    #[test]
    fn effective_rate_ignores_gaps() {
        let mut ts: Vec<i64> = (0..10).map(|k| k * 1000).collect();
        ts.extend((20..30).map(|k| k * 1000));
        assert_eq!(effective_rate_hz(&ts), Some(1.0));
        assert_eq!(effective_rate_hz(&[5]), None);
    }
}
