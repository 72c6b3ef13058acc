//! Resampling, windowing and feature extraction for IMU streams.
//!
//! Streams are linearly interpolated onto a 20 Hz grid and cut into
//! non-overlapping 2 s windows of 40 samples. Each window yields nine features
//! per sensor (accelerometer then gyroscope):
//!
//! | idx | feature                                         |
//! |-----|-------------------------------------------------|
//! | 0-2 | per-axis mean                                   |
//! | 3-5 | per-axis population standard deviation          |
//! | 6   | signal-magnitude area `mean(|x|+|y|+|z|)`       |
//! | 7   | normalised spectral entropy of the magnitude    |
//! | 8   | dominant frequency of the magnitude (Hz)        |
//!
//! The spectral features use the de-meaned magnitude `sqrt(x²+y²+z²)` and the
//! power in DFT bins 1..=19 (0.5 Hz spacing, DC and Nyquist excluded).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensorlog::{Activity, ImuSample, LabelMark};
use crate::TimestampMs;

pub const TARGET_HZ: u32 = 20;
pub const STEP_MS: TimestampMs = 50;
pub const WINDOW_LEN: usize = 40;
pub const WINDOW_MS: TimestampMs = STEP_MS * WINDOW_LEN as TimestampMs;
pub const FEATURES_PER_SENSOR: usize = 9;
pub const FEATURE_DIM: usize = 2 * FEATURES_PER_SENSOR;
/// Spectral bins used for entropy and dominant frequency (DC and Nyquist excluded).
pub const SPECTRAL_BINS: std::ops::RangeInclusive<usize> = 1..=19;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "accel_mean_x",
    "accel_mean_y",
    "accel_mean_z",
    "accel_std_x",
    "accel_std_y",
    "accel_std_z",
    "accel_sma",
    "accel_spectral_entropy",
    "accel_dominant_freq_hz",
    "gyro_mean_x",
    "gyro_mean_y",
    "gyro_mean_z",
    "gyro_std_x",
    "gyro_std_y",
    "gyro_std_z",
    "gyro_sma",
    "gyro_spectral_entropy",
    "gyro_dominant_freq_hz",
];

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("resampling needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("target rate {0} Hz does not give an integer millisecond step")]
    UnsupportedRate(u32),
    #[error("series of {len} samples is shorter than one {WINDOW_LEN}-sample window")]
    SeriesTooShort { len: usize },
    #[error("window has {0} samples, expected {WINDOW_LEN}")]
    WindowLength(usize),
    #[error("accelerometer window starts at {accel} ms but gyroscope window at {gyro} ms")]
    Misaligned {
        accel: TimestampMs,
        gyro: TimestampMs,
    },
    #[error("IMU streams do not overlap")]
    NoOverlap,
}

/// Triaxial series on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    pub start_t: TimestampMs,
    pub step_ms: TimestampMs,
    pub samples: Vec<[f64; 3]>,
}

impl UniformSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_at(&self, k: usize) -> TimestampMs {
        self.start_t + self.step_ms * k as TimestampMs
    }
}

/// A 2 s slice of a uniform series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuWindow<'a> {
    pub start_t: TimestampMs,
    pub samples: &'a [[f64; 3]],
}

/// Feature vector of one 2 s window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub start_t: TimestampMs,
    pub features: [f64; FEATURE_DIM],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Activity>,
}

impl FeatureWindow {
    pub fn end_t(&self) -> TimestampMs {
        self.start_t + WINDOW_MS
    }
}

/// Resamples a sorted IMU stream onto a `target_hz` grid spanning its first to
/// last timestamp.
pub fn resample(stream: &[ImuSample], target_hz: u32) -> Result<UniformSeries, DspError> {
    if stream.len() < 2 {
        return Err(DspError::TooFewSamples(stream.len()));
    }
    if target_hz == 0 || 1000 % target_hz != 0 {
        return Err(DspError::UnsupportedRate(target_hz));
    }
    let step = TimestampMs::from(1000 / target_hz);
    let first = stream[0].t;
    let span = stream[stream.len() - 1].t - first;
    let n = (span / step) as usize + 1;
    Ok(resample_on_grid(stream, first, step, n))
}

/// Linear interpolation of `stream` at `start + k*step`, `k < n`. Grid points
/// outside the stream's span take the nearest endpoint value; callers keep the
/// grid inside the span.
fn resample_on_grid(
    stream: &[ImuSample],
    start: TimestampMs,
    step: TimestampMs,
    n: usize,
) -> UniformSeries {
    let mut samples = Vec::with_capacity(n);
    let mut i = 0;
    for k in 0..n {
        let t = start + step * k as TimestampMs;
        while i + 1 < stream.len() && stream[i + 1].t <= t {
            i += 1;
        }
        let a = &stream[i];
        let value = if a.t >= t || i + 1 == stream.len() {
            [a.x, a.y, a.z]
        } else {
            let b = &stream[i + 1];
            let frac = (t - a.t) as f64 / (b.t - a.t) as f64;
            [
                a.x + (b.x - a.x) * frac,
                a.y + (b.y - a.y) * frac,
                a.z + (b.z - a.z) * frac,
            ]
        };
        samples.push(value);
    }
    UniformSeries {
        start_t: start,
        step_ms: step,
        samples,
    }
}

/// Cuts a series into consecutive non-overlapping windows of [`WINDOW_LEN`]
/// samples; a trailing partial window is dropped.
pub fn window(series: &UniformSeries) -> Result<Vec<ImuWindow<'_>>, DspError> {
    if series.len() < WINDOW_LEN {
        return Err(DspError::SeriesTooShort { len: series.len() });
    }
    Ok(series
        .samples
        .chunks_exact(WINDOW_LEN)
        .enumerate()
        .map(|(w, samples)| ImuWindow {
            start_t: series.t_at(w * WINDOW_LEN),
            samples,
        })
        .collect())
}

/// Reusable extractor holding the planned 40-point FFT.
pub struct FeatureExtractor {
    fft: Arc<dyn Fft<f64>>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureExtractor {
    pub fn new() -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(WINDOW_LEN),
        }
    }

    pub fn extract(
        &self,
        accel: &ImuWindow<'_>,
        gyro: &ImuWindow<'_>,
    ) -> Result<FeatureWindow, DspError> {
        for w in [accel, gyro] {
            if w.samples.len() != WINDOW_LEN {
                return Err(DspError::WindowLength(w.samples.len()));
            }
        }
        if accel.start_t != gyro.start_t {
            return Err(DspError::Misaligned {
                accel: accel.start_t,
                gyro: gyro.start_t,
            });
        }
        let mut features = [0.0; FEATURE_DIM];
        features[..FEATURES_PER_SENSOR].copy_from_slice(&self.sensor_features(accel.samples));
        features[FEATURES_PER_SENSOR..].copy_from_slice(&self.sensor_features(gyro.samples));
        Ok(FeatureWindow {
            start_t: accel.start_t,
            features,
            label: None,
        })
    }

    fn sensor_features(&self, samples: &[[f64; 3]]) -> [f64; FEATURES_PER_SENSOR] {
        let n = samples.len() as f64;
        let mut out = [0.0; FEATURES_PER_SENSOR];
        for axis in 0..3 {
            let mean = samples.iter().map(|s| s[axis]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[axis] - mean).powi(2)).sum::<f64>() / n;
            out[axis] = mean;
            out[3 + axis] = var.sqrt();
        }
        out[6] = samples
            .iter()
            .map(|s| s[0].abs() + s[1].abs() + s[2].abs())
            .sum::<f64>()
            / n;
        let (entropy, dominant) = self.spectral(samples);
        out[7] = entropy;
        out[8] = dominant;
        out
    }

    fn spectral(&self, samples: &[[f64; 3]]) -> (f64, f64) {
        let magnitude: Vec<f64> = samples
            .iter()
            .map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt())
            .collect();
        let mean = magnitude.iter().sum::<f64>() / magnitude.len() as f64;
        let energy: f64 = magnitude.iter().map(|m| m * m).sum();
        let mut buf: Vec<Complex<f64>> = magnitude
            .iter()
            .map(|m| Complex::new(m - mean, 0.0))
            .collect();
        self.fft.process(&mut buf);

        let power: Vec<f64> = SPECTRAL_BINS.map(|k| buf[k].norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        // Rounding residue of a constant magnitude is treated as silence.
        if total <= 1e-24 * magnitude.len() as f64 * energy || total == 0.0 {
            return (0.0, 0.0);
        }
        let entropy = -power
            .iter()
            .map(|p| p / total)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
            / (power.len() as f64).ln();
        let mut best = 0;
        for (i, p) in power.iter().enumerate() {
            if *p > power[best] {
                best = i;
            }
        }
        let bin_hz = f64::from(TARGET_HZ) / WINDOW_LEN as f64;
        let dominant = (*SPECTRAL_BINS.start() + best) as f64 * bin_hz;
        (entropy.clamp(0.0, 1.0), dominant)
    }
}

/// Convenience wrapper around [`FeatureExtractor::extract`].
pub fn extract_features(
    accel: &ImuWindow<'_>,
    gyro: &ImuWindow<'_>,
) -> Result<FeatureWindow, DspError> {
    FeatureExtractor::new().extract(accel, gyro)
}

/// Full IMU pipeline for one trip: both streams are resampled onto a shared
/// 20 Hz grid starting at `max(anchor_t, first accel, first gyro)` and ending
/// inside both streams, windowed, and turned into feature vectors.
pub fn feature_windows(
    accel: &[ImuSample],
    gyro: &[ImuSample],
    anchor_t: TimestampMs,
) -> Result<Vec<FeatureWindow>, DspError> {
    for s in [accel, gyro] {
        if s.len() < 2 {
            return Err(DspError::TooFewSamples(s.len()));
        }
    }
    let start = anchor_t.max(accel[0].t).max(gyro[0].t);
    let end = accel[accel.len() - 1].t.min(gyro[gyro.len() - 1].t);
    if end < start {
        return Err(DspError::NoOverlap);
    }
    let n = ((end - start) / STEP_MS) as usize + 1;
    let a = resample_on_grid(accel, start, STEP_MS, n);
    let g = resample_on_grid(gyro, start, STEP_MS, n);
    let extractor = FeatureExtractor::new();
    window(&a)?
        .iter()
        .zip(window(&g)?.iter())
        .map(|(aw, gw)| extractor.extract(aw, gw))
        .collect()
}

/// Labels each window from per-second marks: a window is `pausing` only when
/// pausing covers strictly more than half of it, otherwise `moving`. Windows
/// before the first mark stay unlabelled.
pub fn label_windows(windows: &mut [FeatureWindow], marks: &[LabelMark]) {
    let Some(first) = marks.first() else {
        return;
    };
    for w in windows.iter_mut() {
        if w.start_t < first.t {
            w.label = None;
            continue;
        }
        let (lo, hi) = (w.start_t, w.end_t());
        let mut pausing_ms = 0;
        for (i, mark) in marks.iter().enumerate() {
            let seg_start = mark.t;
            let seg_end = marks.get(i + 1).map_or(TimestampMs::MAX, |m| m.t);
            let overlap = hi.min(seg_end) - lo.max(seg_start);
            if overlap > 0 && mark.label == Activity::Pausing {
                pausing_ms += overlap;
            }
        }
        w.label = Some(if 2 * pausing_ms > WINDOW_MS {
            Activity::Pausing
        } else {
            Activity::Moving
        });
    }
}

/// Feature matrix as CSV: `start_t_ms`, the 18 features in fixed order, `label`
/// (empty when unknown).
pub fn features_to_csv(windows: &[FeatureWindow]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["start_t_ms"];
    header.extend(FEATURE_NAMES);
    header.push("label");
    writer.write_record(&header).expect("in-memory write");
    for w in windows {
        let mut record = vec![w.start_t.to_string()];
        record.extend(w.features.iter().map(f64::to_string));
        record.push(w.label.map(|l| l.as_str().to_owned()).unwrap_or_default());
        writer.write_record(&record).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory write")
}

#[derive(Debug, Error)]
#[error("feature CSV line {line}: {message}")]
pub struct FeatureCsvError {
    pub line: u64,
    pub message: String,
}

/// Parses the format written by [`features_to_csv`].
pub fn features_from_csv(bytes: &[u8]) -> Result<Vec<FeatureWindow>, FeatureCsvError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let err = |line: u64, message: String| FeatureCsvError { line, message };
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let expected: Vec<&str> = std::iter::once("start_t_ms")
        .chain(FEATURE_NAMES)
        .chain(std::iter::once("label"))
        .collect();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(err(1, "unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| err(line, e.to_string()))?;
        let start_t = record[0]
            .parse()
            .map_err(|e: std::num::ParseIntError| err(line, e.to_string()))?;
        let mut features = [0.0; FEATURE_DIM];
        for (k, f) in features.iter_mut().enumerate() {
            *f = record[k + 1]
                .parse()
                .map_err(|e: std::num::ParseFloatError| err(line, e.to_string()))?;
        }
        let label = match &record[FEATURE_DIM + 1] {
            "" => None,
            "moving" => Some(Activity::Moving),
            "pausing" => Some(Activity::Pausing),
            other => return Err(err(line, format!("unknown label `{other}`"))),
        };
        out.push(FeatureWindow {
            start_t,
            features,
            label,
        });
    }
    Ok(out)
}
