use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geo::{self, LocalFrame};
use super::{synthesize, ScriptSegment, SimConfig, SimError, TripScript};
use crate::dsp::{feature_windows, label_windows, FeatureWindow};
use crate::sensorlog::{
    AedRecord, BeaconId, BuildingRecord, GeoPoint, Guidance, Registry, SessionKind, SurveyResponse,
};
use crate::stats::median_iqr;

const BEACON_UUID: &str = "F7826DA6-4FA2-4E98-8024-BC5B71E0893E";
const SITE_SPACING_M: f64 = 400.0;
/// Distance from the AED at which the final, pause-free approach begins.
const APPROACH_M: f64 = 9.5;
const MIN_APPROACH_S: u32 = 6;
const MIN_PIECE_M: f64 = 6.0;
const SPEED_RANGE: RangeInclusive<f64> = 1.2..=1.6;

/// One building with its AED, in the campus frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub aed_id: String,
    pub building_id: String,
    pub entry: [f64; 2],
    pub aed: [f64; 2],
    pub beacon: BeaconId,
    pub bssids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campus {
    pub frame: LocalFrame,
    pub sites: Vec<Site>,
    pub registry: Registry,
}

/// Buildings on a grid 400 m apart, each with one AED 12-18 m inside its
/// entrance and three access points.
pub fn make_campus(n_sites: usize, seed: u64) -> Campus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = LocalFrame::new(GeoPoint::new(35.0262, 135.7808));
    let mut sites = Vec::with_capacity(n_sites);
    let (mut aeds, mut buildings) = (Vec::new(), Vec::new());
    for i in 0..n_sites {
        let entry = [(i % 3) as f64 * SITE_SPACING_M, (i / 3) as f64 * SITE_SPACING_M];
        let inward = rng.random_range(0.0..std::f64::consts::TAU);
        let aed = geo::add(entry, geo::scale(geo::unit(inward), rng.random_range(12.0..=18.0)));
        let site = Site {
            aed_id: format!("AED-{:02}", i + 1),
            building_id: format!("BLDG-{:02}", i + 1),
            entry,
            aed,
            beacon: BeaconId { uuid: BEACON_UUID.into(), major: 100, minor: i as u16 + 1 },
            bssids: (0..3).map(|j| format!("0a:1b:2c:{:02x}:00:{:02x}", i + 1, j + 1)).collect(),
        };
        let aed_geo = frame.to_geo(aed);
        aeds.push(AedRecord {
            id: site.aed_id.clone(),
            name: format!("Building {} lobby", i + 1),
            lat: aed_geo.lat,
            lon: aed_geo.lon,
            floor: if i % 2 == 0 { "1F".into() } else { "2F".into() },
            building_id: site.building_id.clone(),
            beacon: site.beacon.clone(),
            altitude_m: None,
        });
        buildings.push(BuildingRecord {
            building_id: site.building_id.clone(),
            bssids: site.bssids.iter().cloned().collect(),
            entry_point: frame.to_geo(entry),
        });
        sites.push(site);
    }
    let registry = Registry::new(aeds, buildings).expect("generated registry is consistent");
    Campus { frame, sites, registry }
}

/// Distributions behind a generated trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeParams {
    pub speed_mps: (f64, f64),
    pub start_distance_m: (f64, f64),
    pub prep_zero_prob: f64,
    pub prep_s: (u32, u32),
    /// Outdoor path length over straight-line distance.
    pub outdoor_detour: (f64, f64),
    pub outdoor_pauses: (u32, u32),
    pub indoor_detour: (f64, f64),
    pub indoor_pauses: (u32, u32),
    pub pause_s: (u32, u32),
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            speed_mps: (1.25, 1.5),
            start_distance_m: (50.0, 65.0),
            prep_zero_prob: 0.25,
            prep_s: (2, 6),
            outdoor_detour: (1.6, 2.4),
            outdoor_pauses: (1, 3),
            indoor_detour: (1.8, 2.8),
            indoor_pauses: (1, 2),
            pause_s: (3, 8),
        }
    }
}

impl ShapeParams {
    /// Lighter pausing for classifier corpora (about one window in seven pausing).
    pub fn training() -> Self {
        Self {
            outdoor_pauses: (1, 3),
            indoor_pauses: (1, 3),
            pause_s: (5, 12),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TripShape {
    start: [f64; 2],
    speed: f64,
    prep_s: u32,
    outdoor_len: f64,
    outdoor_side: f64,
    outdoor_pauses: Vec<(f64, u32)>,
    approach_point: [f64; 2],
    indoor_len: f64,
    indoor_pauses: Vec<(f64, u32)>,
}

fn draw_pauses(rng: &mut ChaCha8Rng, count: (u32, u32), dur: (u32, u32)) -> Vec<(f64, u32)> {
    let n = rng.random_range(count.0..=count.1);
    let mut p: Vec<(f64, u32)> = (0..n)
        .map(|_| (rng.random_range(0.1..0.9), rng.random_range(dur.0..=dur.1)))
        .collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p
}

fn draw_shape(site: &Site, params: &ShapeParams, rng: &mut ChaCha8Rng) -> TripShape {
    let outward = {
        let v = geo::sub(site.entry, site.aed);
        v[1].atan2(v[0])
    };
    let start_angle = outward + rng.random_range(-1.0..1.0);
    let start = geo::add(
        site.entry,
        geo::scale(
            geo::unit(start_angle),
            rng.random_range(params.start_distance_m.0..=params.start_distance_m.1),
        ),
    );
    let speed = rng.random_range(params.speed_mps.0..=params.speed_mps.1);
    let prep_s = if rng.random::<f64>() < params.prep_zero_prob {
        0
    } else {
        rng.random_range(params.prep_s.0..=params.prep_s.1)
    };
    let outdoor_len =
        geo::dist(start, site.entry) * rng.random_range(params.outdoor_detour.0..=params.outdoor_detour.1);
    let outdoor_side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let outdoor_pauses = draw_pauses(rng, params.outdoor_pauses, params.pause_s);
    let turn = rng.random_range(0.7..1.4) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let approach_point =
        geo::add(site.aed, geo::scale(geo::unit(outward + turn), APPROACH_M));
    let indoor_len = geo::dist(site.entry, approach_point)
        * rng.random_range(params.indoor_detour.0..=params.indoor_detour.1);
    let indoor_pauses = draw_pauses(rng, params.indoor_pauses, params.pause_s);
    TripShape {
        start,
        speed,
        prep_s,
        outdoor_len,
        outdoor_side,
        outdoor_pauses,
        approach_point,
        indoor_len,
        indoor_pauses,
    }
}

/// Post-training version of a shape: detours, pauses and preparation shrink
/// by `factor` with independent jitter in [0.85, 1.15].
fn improved_shape(pre: &TripShape, site: &Site, factor: f64, rng: &mut ChaCha8Rng) -> TripShape {
    let mut jitter = || factor * rng.random_range(0.85..=1.15);
    let mut post = pre.clone();
    post.prep_s = (f64::from(pre.prep_s) * jitter()).round() as u32;
    post.outdoor_len =
        (pre.outdoor_len * jitter()).max(geo::dist(pre.start, site.entry) * 1.03);
    post.indoor_len =
        (pre.indoor_len * jitter()).max(geo::dist(site.entry, pre.approach_point) * 1.03);
    for p in post.outdoor_pauses.iter_mut().chain(post.indoor_pauses.iter_mut()) {
        p.1 = ((f64::from(p.1) * jitter()).round() as u32).max(1);
    }
    post
}

fn walk_seconds(len: f64, speed: f64, min_s: u32) -> u32 {
    let mut dur = ((len / speed).round() as u32).max(min_s).max(1);
    while len / f64::from(dur) > *SPEED_RANGE.end() {
        dur += 1;
    }
    while dur > min_s.max(1) && len / f64::from(dur) < *SPEED_RANGE.start() {
        dur -= 1;
    }
    dur
}

/// Walks along `a -> via -> b` with pauses at the given path fractions.
/// Pauses that would leave a leg shorter than 6 m are dropped.
fn walk_with_pauses(
    a: [f64; 2],
    via: [f64; 2],
    b: [f64; 2],
    pauses: &[(f64, u32)],
    speed: f64,
    indoor: bool,
    out: &mut Vec<ScriptSegment>,
) {
    let (l1, l2) = (geo::dist(a, via), geo::dist(via, b));
    let total = l1 + l2;
    let at = |s: f64| {
        if s <= l1 {
            geo::lerp(a, via, if l1 > 0.0 { s / l1 } else { 1.0 })
        } else {
            geo::lerp(via, b, (s - l1) / l2)
        }
    };
    // breakpoints along the path: (arc length, pause seconds)
    let mut stops: Vec<(f64, u32)> = vec![(l1, 0)];
    for &(frac, dur) in pauses {
        let s = frac * total;
        let clear = [0.0, l1, total]
            .iter()
            .chain(stops.iter().filter(|x| x.1 > 0).map(|x| &x.0))
            .all(|&q| (s - q).abs() >= MIN_PIECE_M);
        if clear {
            stops.push((s, dur));
        }
    }
    stops.push((total, 0));
    stops.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut from = 0.0;
    for (s, pause) in stops {
        if s - from > 1e-9 {
            out.push(ScriptSegment::walk(walk_seconds(s - from, speed, 1), at(s), indoor));
            from = s;
        }
        if pause > 0 {
            out.push(ScriptSegment::pause(pause, indoor));
        }
    }
}

fn build_segments(site: &Site, shape: &TripShape) -> Vec<ScriptSegment> {
    let mut segs = Vec::new();
    if shape.prep_s > 0 {
        segs.push(ScriptSegment::pause(shape.prep_s, false));
    }
    let d = geo::detour_point(shape.start, site.entry, shape.outdoor_len, shape.outdoor_side);
    walk_with_pauses(shape.start, d, site.entry, &shape.outdoor_pauses, shape.speed, false, &mut segs);

    let p = shape.approach_point;
    let w = [1.0, -1.0]
        .map(|side| geo::detour_point(site.entry, p, shape.indoor_len, side))
        .into_iter()
        .max_by(|x, y| geo::dist(*x, site.aed).total_cmp(&geo::dist(*y, site.aed)))
        .expect("two candidates");
    walk_with_pauses(site.entry, w, p, &shape.indoor_pauses, shape.speed, true, &mut segs);
    segs.push(ScriptSegment::walk(
        walk_seconds(geo::dist(p, site.aed), shape.speed, MIN_APPROACH_S),
        site.aed,
        true,
    ));
    segs
}

#[allow(clippy::too_many_arguments)]
fn script_for(
    campus: &Campus,
    site: &Site,
    shape: &TripShape,
    seed: u64,
    participant_id: &str,
    kind: SessionKind,
    guidance: Guidance,
    start_t: i64,
) -> TripScript {
    TripScript {
        seed,
        trip_id: format!("{participant_id}-{}", kind.as_str()),
        participant_id: participant_id.to_owned(),
        session_kind: kind,
        guidance,
        target_aed: site.aed_id.clone(),
        start_t,
        frame: campus.frame,
        origin: shape.start,
        aed_position: site.aed,
        beacon: site.beacon.clone(),
        building_bssids: site.bssids.clone(),
        segments: build_segments(site, shape),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortParticipant {
    pub participant_id: String,
    pub group: Guidance,
    pub pre: TripScript,
    pub post: TripScript,
    /// In-app survey after the first and the second visit.
    pub surveys: [SurveyResponse; 2],
    pub sus: [u8; 10],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub seed: u64,
    pub improvement_factor: f64,
    pub campus: Campus,
    pub participants: Vec<CohortParticipant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub participant_id: String,
    pub group: Guidance,
    pub d_t_pre: f64,
    pub d_t_post: f64,
    pub d_p_pre: f64,
    pub d_p_post: f64,
    pub delta_d_t: f64,
    pub delta_d_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTruth {
    pub seed: u64,
    pub improvement_factor: f64,
    pub participants: Vec<ParticipantTruth>,
    pub median_delta_d_t: f64,
}

const BASE_T: i64 = 1_700_000_000_000;
const DAY_MS: i64 = 86_400_000;

/// Paired pre-exam / first post-exam scripts for `n` participants at the
/// practised AED, alternating map and no-map groups.
pub fn synthesize_cohort(n: usize, improvement_factor: f64, seed: u64) -> Result<Cohort, SimError> {
    if n < 2 {
        return Err(SimError::InvalidCohort(format!("need at least 2 participants, got {n}")));
    }
    if !(improvement_factor > 0.0 && improvement_factor <= 1.0) {
        return Err(SimError::InvalidCohort(format!(
            "improvement factor {improvement_factor} outside (0, 1]"
        )));
    }
    let campus = make_campus(6, seed);
    let mut participants = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let pid = format!("P{:02}", i + 1);
        let group = if i % 2 == 0 { Guidance::Map } else { Guidance::NoMap };
        let site = &campus.sites[i % campus.sites.len()];
        let pre_shape = draw_shape(site, &ShapeParams::default(), &mut rng);
        let post_shape = improved_shape(&pre_shape, site, improvement_factor, &mut rng);
        let pre_t = BASE_T + i as i64 * DAY_MS;
        let pre = script_for(&campus, site, &pre_shape, rng.random(), &pid, SessionKind::PreExam, group, pre_t);
        let post = script_for(
            &campus,
            site,
            &post_shape,
            rng.random(),
            &pid,
            SessionKind::PostExam1,
            group,
            pre_t + 7 * DAY_MS,
        );
        let first = [
            rng.random_range(1..=3),
            rng.random_range(2..=4),
            rng.random_range(1..=3),
            rng.random_range(2..=4),
            rng.random_range(2..=4),
        ];
        let mut second = first;
        second[0] = (second[0] + rng.random_range(0..=1)).min(4);
        for q in second.iter_mut().skip(1) {
            *q = (*q + rng.random_range(0..=1)).min(5);
        }
        let survey = |trip: &TripScript, a: [u8; 5]| SurveyResponse {
            trip_id: trip.trip_id.clone(),
            q1: a[0],
            q2: a[1],
            q3: a[2],
            q4: a[3],
            q5: a[4],
        };
        let surveys = [survey(&pre, first), survey(&post, second)];
        let mut sus = [0u8; 10];
        for (k, item) in sus.iter_mut().enumerate() {
            *item = if k % 2 == 0 { rng.random_range(3..=5) } else { rng.random_range(1..=3) };
        }
        participants.push(CohortParticipant { participant_id: pid, group, pre, post, surveys, sus });
    }
    Ok(Cohort { seed, improvement_factor, campus, participants })
}

impl Cohort {
    pub fn scripts(&self) -> impl Iterator<Item = &TripScript> {
        self.participants.iter().flat_map(|p| [&p.pre, &p.post])
    }

    /// Script-derived efficiency outcomes, independent of any sensor noise.
    pub fn truth(&self, cfg: &SimConfig) -> Result<CohortTruth, SimError> {
        let mut participants = Vec::with_capacity(self.participants.len());
        for p in &self.participants {
            let pre = super::script_truth(&p.pre, cfg)?;
            let post = super::script_truth(&p.post, cfg)?;
            participants.push(ParticipantTruth {
                participant_id: p.participant_id.clone(),
                group: p.group,
                d_t_pre: pre.d_t_s,
                d_t_post: post.d_t_s,
                d_p_pre: pre.d_p_s,
                d_p_post: post.d_p_s,
                delta_d_t: (pre.d_t_s - post.d_t_s) / pre.d_t_s,
                delta_d_p: (pre.d_p_s > 0.0).then(|| (pre.d_p_s - post.d_p_s) / pre.d_p_s),
            });
        }
        let deltas: Vec<f64> = participants.iter().map(|p| p.delta_d_t).collect();
        let median_delta_d_t = median_iqr(&deltas).expect("non-empty cohort").median;
        Ok(CohortTruth {
            seed: self.seed,
            improvement_factor: self.improvement_factor,
            participants,
            median_delta_d_t,
        })
    }

    /// `participant_id,group,visit,trip_id,q1..q5`, two rows per participant.
    pub fn surveys_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["participant_id", "group", "visit", "trip_id", "q1", "q2", "q3", "q4", "q5"])
            .expect("in-memory CSV write");
        for p in &self.participants {
            for (visit, s) in p.surveys.iter().enumerate() {
                let mut rec = vec![
                    p.participant_id.clone(),
                    p.group.as_str().to_owned(),
                    (visit + 1).to_string(),
                    s.trip_id.clone(),
                ];
                rec.extend(s.answers().iter().map(|a| a.to_string()));
                w.write_record(&rec).expect("in-memory CSV write");
            }
        }
        w.into_inner().expect("in-memory CSV flush")
    }

    /// `participant_id,item1..item10`.
    pub fn sus_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["participant_id".to_owned()];
        header.extend((1..=10).map(|i| format!("item{i}")));
        w.write_record(&header).expect("in-memory CSV write");
        for p in &self.participants {
            let mut rec = vec![p.participant_id.clone()];
            rec.extend(p.sus.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory CSV write");
        }
        w.into_inner().expect("in-memory CSV flush")
    }
}

/// Labelled feature windows from `n_trips` generated trips. Windows after the
/// walker reaches the AED are left out.
pub fn training_corpus(
    n_trips: usize,
    seed: u64,
    params: &ShapeParams,
    cfg: &SimConfig,
) -> Result<Vec<FeatureWindow>, SimError> {
    let campus = make_campus(6, seed);
    let mut out = Vec::new();
    for i in 0..n_trips {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_696e);
        rng.set_stream(i as u64);
        let site = &campus.sites[i % campus.sites.len()];
        let shape = draw_shape(site, params, &mut rng);
        let script = script_for(
            &campus,
            site,
            &shape,
            rng.random(),
            &format!("T{:03}", i + 1),
            SessionKind::Routine,
            Guidance::Map,
            BASE_T + i as i64 * DAY_MS,
        );
        let trip = synthesize(&script, cfg)?;
        let s = &trip.log.streams;
        let mut windows = feature_windows(&s.accel, &s.gyro, script.start_t)?;
        label_windows(&mut windows, s.labels.as_deref().unwrap_or_default());
        out.extend(
            windows
                .into_iter()
                .filter(|w| w.label.is_some() && w.end_t() <= trip.truth.reach_t),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorlog::Activity;
    use crate::simtrip::{script_truth, SegmentKind};

    #[test]
    fn campus_registry_is_valid() {
        let c = make_campus(6, 1);
        assert_eq!(c.registry.aeds.len(), 6);
        c.registry.validate().unwrap();
    }

    #[test]
    fn cohort_scripts_are_valid_and_plausible() {
        let cohort = synthesize_cohort(8, 0.6, 3).unwrap();
        for s in cohort.scripts() {
            s.validate().unwrap();
            let mut pos = s.origin;
            for seg in &s.segments {
                if let Some(to) = seg.to {
                    let v = geo::dist(pos, to) / f64::from(seg.duration_s);
                    assert!((1.2..=1.6 + 1e-9).contains(&v), "{} speed {v}", s.trip_id);
                    pos = to;
                }
            }
            let last = s.segments.last().unwrap();
            assert_eq!(last.kind, SegmentKind::Walk);
            assert!(last.duration_s >= MIN_APPROACH_S);
        }
    }

    #[test]
    fn cohort_is_reproducible() {
        let a = synthesize_cohort(4, 0.6, 9).unwrap();
        let b = synthesize_cohort(4, 0.6, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.participants[0].pre, synthesize_cohort(4, 0.6, 10).unwrap().participants[0].pre);
    }

    #[test]
    fn improvement_shortens_trips() {
        let cohort = synthesize_cohort(20, 0.6, 7).unwrap();
        let truth = cohort.truth(&SimConfig::default()).unwrap();
        assert!(truth.median_delta_d_t > 0.2 && truth.median_delta_d_t < 0.5, "{}", truth.median_delta_d_t);
        let unchanged = synthesize_cohort(20, 1.0, 7).unwrap().truth(&SimConfig::default()).unwrap();
        assert!(unchanged.median_delta_d_t.abs() < 0.1);
    }

    #[test]
    fn truth_phases_are_ordered() {
        let cohort = synthesize_cohort(6, 0.6, 2).unwrap();
        for s in cohort.scripts() {
            let t = script_truth(s, &SimConfig::default()).unwrap();
            assert!(t.start_t <= t.prep_end && t.prep_end <= t.entry_t && t.entry_t <= t.arrival_t);
            assert!(t.d_p_s <= t.d_t_s);
        }
    }

    #[test]
    fn bad_cohort_requests() {
        assert!(synthesize_cohort(1, 0.6, 0).is_err());
        assert!(synthesize_cohort(5, 0.0, 0).is_err());
        assert!(synthesize_cohort(5, 1.5, 0).is_err());
    }

    #[test]
    fn training_corpus_is_mostly_moving() {
        let w = training_corpus(4, 5, &ShapeParams::training(), &SimConfig::default()).unwrap();
        let pausing = w.iter().filter(|w| w.label == Some(Activity::Pausing)).count();
        assert!(pausing > 0 && pausing * 3 < w.len());
    }
}
