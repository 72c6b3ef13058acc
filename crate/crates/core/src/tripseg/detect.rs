use std::collections::BTreeSet;

use crate::dsp::{feature_windows, DspError, WINDOW_MS};
use crate::pausenet::{predict, PausenetError, PausingModel};
use crate::sensorlog::{Activity, BeaconId, BeaconSighting, ImuSample, WifiScan};
use crate::TimestampMs;

/// Whole-second index of `t` relative to `origin`, rounded to nearest.
fn second_of(t: TimestampMs, origin: TimestampMs) -> i64 {
    (t - origin + 500).div_euclid(1000)
}

/// Streaming beacon dwell check. Sightings must arrive in time order; the
/// first sighting of any beacon fixes the one-second grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalDetector {
    target: BeaconId,
    threshold_dbm: f64,
    dwell_s: u32,
    origin: Option<TimestampMs>,
    last_second: Option<i64>,
    run: u32,
    arrival: Option<TimestampMs>,
}

impl ArrivalDetector {
    pub fn new(target: BeaconId, threshold_dbm: f64, dwell_s: u32) -> Self {
        Self {
            target,
            threshold_dbm,
            dwell_s: dwell_s.max(1),
            origin: None,
            last_second: None,
            run: 0,
            arrival: None,
        }
    }

    /// Feeds one sighting; returns the arrival time once the dwell is met.
    pub fn feed(&mut self, s: &BeaconSighting) -> Option<TimestampMs> {
        if self.arrival.is_some() {
            return self.arrival;
        }
        let origin = *self.origin.get_or_insert(s.t);
        if s.beacon != self.target || s.rssi_dbm < self.threshold_dbm {
            return None;
        }
        let second = second_of(s.t, origin);
        match self.last_second {
            Some(last) if last == second => return None,
            Some(last) if last + 1 == second => self.run += 1,
            _ => self.run = 1,
        }
        self.last_second = Some(second);
        if self.run >= self.dwell_s {
            self.arrival = Some(s.t);
        }
        self.arrival
    }

    pub fn arrival(&self) -> Option<TimestampMs> {
        self.arrival
    }
}

/// Time of the qualifying sighting that completes the first run of `dwell_s`
/// consecutive seconds with the target beacon at or above `threshold_dbm`.
pub fn detect_arrival(
    beacon: &[BeaconSighting],
    target: &BeaconId,
    threshold_dbm: f64,
    dwell_s: u32,
) -> Option<TimestampMs> {
    let mut det = ArrivalDetector::new(target.clone(), threshold_dbm, dwell_s);
    beacon.iter().find_map(|s| det.feed(s))
}

/// Start of the first run of `confirm_s` consecutive seconds in which some
/// BSSID of the target building is heard at or above `threshold_dbm`.
pub fn detect_entry(
    wifi: &[WifiScan],
    bssids: &BTreeSet<String>,
    threshold_dbm: f64,
    confirm_s: u32,
) -> Option<TimestampMs> {
    let origin = wifi.first()?.t;
    let confirm = confirm_s.max(1);
    let mut run_start: Option<(i64, TimestampMs)> = None;
    let mut last: Option<i64> = None;
    for scan in wifi {
        if scan.rssi_dbm < threshold_dbm || !bssids.contains(&scan.bssid) {
            continue;
        }
        let second = second_of(scan.t, origin);
        match last {
            Some(l) if l == second => continue,
            Some(l) if l + 1 == second => {}
            _ => run_start = Some((second, scan.t)),
        }
        last = Some(second);
        let (first_second, first_t) = run_start.expect("run started");
        if second - first_second + 1 >= i64::from(confirm) {
            return Some(first_t);
        }
    }
    None
}

/// Classified 2 s window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WindowLabel {
    pub start_t: TimestampMs,
    pub label: Activity,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PauseDetectionError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Model(#[from] PausenetError),
}

/// Classifies every full 2 s window of the IMU streams, anchored at `anchor_t`.
pub fn classify_windows(
    accel: &[ImuSample],
    gyro: &[ImuSample],
    model: &PausingModel,
    anchor_t: TimestampMs,
) -> Result<Vec<WindowLabel>, PauseDetectionError> {
    let windows = feature_windows(accel, gyro, anchor_t)?;
    let labels = predict(model, &windows)?;
    Ok(windows
        .iter()
        .zip(labels)
        .map(|(w, label)| WindowLabel { start_t: w.start_t, label })
        .collect())
}

/// Maximal runs of adjacent pausing windows as `[start, end)` intervals.
pub fn pause_intervals(windows: &[WindowLabel]) -> Vec<[TimestampMs; 2]> {
    let mut out: Vec<[TimestampMs; 2]> = Vec::new();
    for w in windows.iter().filter(|w| w.label == Activity::Pausing) {
        let end = w.start_t + WINDOW_MS;
        match out.last_mut() {
            Some(last) if last[1] == w.start_t => last[1] = end,
            _ => out.push([w.start_t, end]),
        }
    }
    out
}

/// Runs the classifier over the trip and returns its pause intervals.
pub fn detect_pauses(
    accel: &[ImuSample],
    gyro: &[ImuSample],
    model: &PausingModel,
    anchor_t: TimestampMs,
) -> Result<Vec<[TimestampMs; 2]>, PauseDetectionError> {
    Ok(pause_intervals(&classify_windows(accel, gyro, model, anchor_t)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beacon(minor: u16) -> BeaconId {
        BeaconId { uuid: "U".into(), major: 1, minor }
    }

    fn sightings(rssi: &[f64]) -> Vec<BeaconSighting> {
        rssi.iter()
            .enumerate()
            .map(|(i, &r)| BeaconSighting { t: 1_000 * i as i64, beacon: beacon(1), rssi_dbm: r })
            .collect()
    }

    #[test]
    fn dwell_completes_on_fourth_second() {
        let s = sightings(&[-80.0, -65.0, -64.0, -66.0, -60.0]);
        assert_eq!(detect_arrival(&s, &beacon(1), -70.0, 3), Some(3_000));
    }

    #[test]
    fn never_above_threshold() {
        let s = sightings(&[-80.0, -75.0, -71.0]);
        assert_eq!(detect_arrival(&s, &beacon(1), -70.0, 3), None);
    }

    #[test]
    fn always_above_threshold() {
        let s = sightings(&[-50.0; 6]);
        assert_eq!(detect_arrival(&s, &beacon(1), -70.0, 3), Some(2_000));
    }

    #[test]
    fn missing_second_breaks_run() {
        let mut s = sightings(&[-60.0; 6]);
        s.remove(2);
        assert_eq!(detect_arrival(&s, &beacon(1), -70.0, 3), Some(5_000));
    }

    #[test]
    fn other_beacons_are_ignored() {
        let mut s = sightings(&[-60.0; 3]);
        s[1].beacon = beacon(2);
        assert_eq!(detect_arrival(&s, &beacon(1), -70.0, 2), None);
    }

    #[test]
    fn entry_at_start_of_confirmed_run() {
        let bssids: BTreeSet<String> = ["aa".to_string()].into();
        let mut wifi = Vec::new();
        for s in 0..100i64 {
            wifi.push(WifiScan { t: s * 1000, bssid: "street".into(), rssi_dbm: -50.0 });
            if s == 85 || s >= 90 {
                wifi.push(WifiScan { t: s * 1000, bssid: "aa".into(), rssi_dbm: -60.0 });
            }
        }
        assert_eq!(detect_entry(&wifi, &bssids, -75.0, 3), Some(90_000));
    }

    #[test]
    fn weak_or_foreign_bssids_never_confirm() {
        let bssids: BTreeSet<String> = ["aa".to_string()].into();
        let wifi: Vec<_> = (0..10)
            .flat_map(|s| {
                [
                    WifiScan { t: s * 1000, bssid: "aa".into(), rssi_dbm: -80.0 },
                    WifiScan { t: s * 1000, bssid: "bb".into(), rssi_dbm: -40.0 },
                ]
            })
            .collect();
        assert_eq!(detect_entry(&wifi, &bssids, -75.0, 3), None);
    }

    #[test]
    fn adjacent_pausing_windows_merge() {
        let labels = [
            (0, Activity::Moving),
            (2000, Activity::Pausing),
            (4000, Activity::Pausing),
            (6000, Activity::Moving),
            (8000, Activity::Pausing),
        ]
        .map(|(start_t, label)| WindowLabel { start_t, label });
        assert_eq!(pause_intervals(&labels), vec![[2000, 6000], [8000, 10000]]);
    }
}
