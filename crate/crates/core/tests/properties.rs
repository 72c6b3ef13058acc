use aedtrace_core::dsp::{feature_windows, FeatureWindow, FEATURE_DIM, WINDOW_MS};
use aedtrace_core::metrics::{delta, survival_rate};
use aedtrace_core::pausenet::{evaluate_predictions, predict, smote, train, Confusion, PausingModel, TrainParams};
use aedtrace_core::sensorlog::{
    load_trip, validate_survey, Activity, BeaconId, BeaconSighting, GeoPoint, ImuSample, SessionKind,
};
use aedtrace_core::session::{distance, replay, Session, SessionConfig, SessionEvent, SessionState};
use aedtrace_core::simtrip::{make_campus, synthesize, synthesize_cohort, SimConfig};
use aedtrace_core::stats::{hodges_lehmann, hodges_lehmann_point, holm_adjust, CiMethod, HlOptions};
use aedtrace_core::tripseg::{detect_arrival, segment_with_windows, SegmentConfig, WindowLabel};
use proptest::prelude::*;

fn imu_stream(t0: i64, secs: usize, vals: &[[f64; 3]]) -> Vec<ImuSample> {
    (0..secs * 100)
        .map(|k| {
            let v = vals[k % vals.len()];
            ImuSample { t: t0 + 10 * k as i64, x: v[0], y: v[1], z: v[2] }
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn features_scale_with_signal(
        vals in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 40..200),
        k in 0.1f64..10.0,
    ) {
        let a = imu_stream(0, 4, &vals);
        let g: Vec<ImuSample> = a.iter().map(|s| ImuSample { x: s.y, y: s.z, z: s.x, ..*s }).collect();
        let scale = |s: &[ImuSample]| s.iter().map(|s| ImuSample { x: s.x * k, y: s.y * k, z: s.z * k, ..*s }).collect::<Vec<_>>();
        let base = feature_windows(&a, &g, 0).unwrap();
        let scaled = feature_windows(&scale(&a), &scale(&g), 0).unwrap();
        for (w0, w1) in base.iter().zip(&scaled) {
            for sensor in 0..2 {
                let o = sensor * 9;
                for i in 0..7 {
                    prop_assert!(close(w0.features[o + i] * k, w1.features[o + i], 1e-9));
                }
                prop_assert!((w0.features[o + 7] - w1.features[o + 7]).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&w0.features[o + 7]));
                prop_assert!((0.0..=10.0).contains(&w0.features[o + 8]));
            }
        }
    }

    #[test]
    fn features_ignore_time_shift(
        vals in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 40..200),
        shift in -1_000_000i64..1_000_000,
    ) {
        let a = imu_stream(1_000_000, 4, &vals);
        let shifted: Vec<ImuSample> = a.iter().map(|s| ImuSample { t: s.t + shift, ..*s }).collect();
        let base = feature_windows(&a, &a, 1_000_000).unwrap();
        let moved = feature_windows(&shifted, &shifted, 1_000_000 + shift).unwrap();
        prop_assert_eq!(base.len(), moved.len());
        for (w0, w1) in base.iter().zip(&moved) {
            prop_assert_eq!(w0.start_t + shift, w1.start_t);
            prop_assert_eq!(w0.features, w1.features);
        }
    }

    #[test]
    fn holm_is_monotone_and_bounded(p in prop::collection::vec(0.0f64..=1.0, 0..30)) {
        let adj = holm_adjust(&p).unwrap();
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
        for w in order.windows(2) {
            prop_assert!(adj[w[0]] <= adj[w[1]]);
        }
        for (raw, a) in p.iter().zip(&adj) {
            prop_assert!(a >= raw && *a <= 1.0);
        }
    }

    #[test]
    fn hl_is_translation_equivariant(
        d in prop::collection::vec(-50i32..50, 1..40),
        c in -100i32..100,
    ) {
        // quarter units keep every Walsh average exact
        let d: Vec<f64> = d.into_iter().map(|v| f64::from(v) / 4.0).collect();
        let c = f64::from(c) / 4.0;
        let shifted: Vec<f64> = d.iter().map(|v| v + c).collect();
        prop_assert_eq!(hodges_lehmann_point(&shifted).unwrap(), hodges_lehmann_point(&d).unwrap() + c);
    }

    #[test]
    fn bootstrap_interval_is_seeded_and_contains_estimate(
        d in prop::collection::vec(-20.0f64..20.0, 1..25),
        seed in any::<u64>(),
    ) {
        let opts = HlOptions { resamples: 300, seed, ..HlOptions::default() };
        let a = hodges_lehmann(&d, &opts).unwrap();
        prop_assert_eq!(&a, &hodges_lehmann(&d, &opts).unwrap());
        prop_assert!(a.ci_low <= a.estimate && a.estimate <= a.ci_high);
        let w = hodges_lehmann(&d, &HlOptions { ci: CiMethod::WalshExact, ..opts }).unwrap();
        prop_assert!(w.ci_low <= w.estimate && w.estimate <= w.ci_high);
    }

    #[test]
    fn survival_decreases(a in 0.0f64..3600.0, step in 0.001f64..600.0) {
        let (x, y) = (survival_rate(a).unwrap(), survival_rate(a + step).unwrap());
        prop_assert!(y < x && y > 0.0 && x <= 92.13);
    }

    #[test]
    fn delta_is_scale_invariant(pre in 1.0f64..1000.0, post in 0.0f64..2000.0, k in 0.01f64..100.0) {
        let d = delta(pre, post).unwrap();
        prop_assert!((delta(pre * k, post * k).unwrap() - d).abs() < 1e-12);
        prop_assert!(d <= 1.0);
        prop_assert_eq!(d > 0.0, pre > post);
    }

    #[test]
    fn arrival_never_earlier_with_stricter_rules(
        rssi in prop::collection::vec(prop::option::of(-95.0f64..-40.0), 1..60),
        thr in -90.0f64..-50.0,
        raise in 0.0f64..20.0,
        dwell in 1u32..6,
    ) {
        let target = BeaconId { uuid: "u".into(), major: 1, minor: 1 };
        let sightings: Vec<BeaconSighting> = rssi
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|r| BeaconSighting { t: 1000 * i as i64, beacon: target.clone(), rssi_dbm: r }))
            .collect();
        let at = |thr: f64, dwell: u32| detect_arrival(&sightings, &target, thr, dwell).unwrap_or(i64::MAX);
        let base = at(thr, dwell);
        prop_assert!(at(thr + raise, dwell) >= base);
        prop_assert!(at(thr, dwell + 1) >= base);
    }

    #[test]
    fn ready_gate_is_fifteen_metres(d in 0.0f64..40.0, bearing in 0.0f64..360.0) {
        let registry = make_campus(3, 1).registry;
        let mut s = Session::new("P", registry, SessionConfig::default()).unwrap();
        let start = GeoPoint::new(35.0, 135.0);
        s.step(&SessionEvent::PreSurveySubmitted { t: 0 }).unwrap();
        s.step(&SessionEvent::ExamSelected { t: 0, kind: SessionKind::PreExam, target_aed: None, start }).unwrap();
        // destination point on the sphere
        let r = 6_371_008.8;
        let (lat1, lon1, b, dr) = (35f64.to_radians(), 135f64.to_radians(), bearing.to_radians(), d / r);
        let lat2 = (lat1.sin() * dr.cos() + lat1.cos() * dr.sin() * b.cos()).asin();
        let lon2 = lon1 + (b.sin() * dr.sin() * lat1.cos()).atan2(dr.cos() - lat1.sin() * lat2.sin());
        let (lat, lon) = (lat2.to_degrees(), lon2.to_degrees());
        let dist = distance(lat, lon, 35.0, 135.0).unwrap();
        let state = s.step(&SessionEvent::Position { t: 1, lat, lon }).unwrap();
        prop_assert_eq!(state == SessionState::ReadyToStart, dist <= 15.0);
    }

    #[test]
    fn survey_ranges(raw in prop::array::uniform5(-2i64..8)) {
        let ok = (1..=4).contains(&raw[0]) && raw[1..].iter().all(|v| (1..=5).contains(v));
        prop_assert_eq!(validate_survey("t", raw).is_ok(), ok);
    }

    #[test]
    fn recomputed_metrics_match(truth in prop::collection::vec(any::<bool>(), 1..80), pred in prop::collection::vec(any::<bool>(), 80)) {
        let act = |b: bool| if b { Activity::Pausing } else { Activity::Moving };
        let t: Vec<Activity> = truth.iter().map(|&b| act(b)).collect();
        let p: Vec<Activity> = pred[..t.len()].iter().map(|&b| act(b)).collect();
        let m = evaluate_predictions(&t, &p).unwrap();
        let c: Confusion = m.confusion;
        let prf = |tp: usize, fp: usize, fn_: usize| {
            let pr = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            let rc = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
            let f1 = if pr + rc > 0.0 { 2.0 * pr * rc / (pr + rc) } else { 0.0 };
            (pr, rc, f1)
        };
        let mv = prf(c.moving_as_moving, c.pausing_as_moving, c.moving_as_pausing);
        let pa = prf(c.pausing_as_pausing, c.moving_as_pausing, c.pausing_as_moving);
        prop_assert_eq!((m.moving.precision, m.moving.recall, m.moving.f1), mv);
        prop_assert_eq!((m.pausing.precision, m.pausing.recall, m.pausing.f1), pa);
        let n_m = (c.moving_as_moving + c.moving_as_pausing) as f64;
        let n_p = (c.pausing_as_pausing + c.pausing_as_moving) as f64;
        prop_assert_eq!(m.weighted_f1, (n_m * mv.2 + n_p * pa.2) / (n_m + n_p));
    }
}

fn window(start_t: i64, features: [f64; FEATURE_DIM], label: Activity) -> FeatureWindow {
    FeatureWindow { start_t, features, label: Some(label) }
}

fn cloud(seed: u64, n: usize) -> Vec<FeatureWindow> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 3 == 0 { Activity::Pausing } else { Activity::Moving };
            let centre = if label == Activity::Pausing { 1.0 } else { -1.0 };
            let mut f = [0.0; FEATURE_DIM];
            for (j, v) in f.iter_mut().enumerate() {
                *v = centre * (1.0 + j as f64 * 0.1) + rng.random_range(-0.6..0.6);
            }
            window(2000 * i as i64, f, label)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smote_points_lie_on_segments(seed in any::<u64>(), n in 8usize..40) {
        let train = cloud(seed, n);
        let r = smote(&train, 5, seed).unwrap();
        for (s, &(a, b)) in r.windows[train.len()..].iter().zip(&r.origins) {
            let (a, b) = (&train[a], &train[b]);
            prop_assert_eq!(a.label, s.label);
            prop_assert_eq!(b.label, s.label);
            // s = a + u (b - a) for a single u in [0, 1)
            let mut u: Option<f64> = None;
            for j in 0..FEATURE_DIM {
                let (lo, hi) = (a.features[j].min(b.features[j]), a.features[j].max(b.features[j]));
                prop_assert!(s.features[j] >= lo - 1e-9 && s.features[j] <= hi + 1e-9);
                let span = b.features[j] - a.features[j];
                if span.abs() > 1e-6 {
                    let uj = (s.features[j] - a.features[j]) / span;
                    if let Some(u0) = u {
                        prop_assert!((uj - u0).abs() < 1e-6);
                    } else {
                        u = Some(uj);
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_feature_scaling_keeps_predictions(seed in any::<u64>(), k in 0.05f64..20.0) {
        let train_set = cloud(seed, 45);
        let scaled: Vec<FeatureWindow> = train_set
            .iter()
            .map(|w| FeatureWindow { features: w.features.map(|v| v * k), ..w.clone() })
            .collect();
        let params = TrainParams { seed, ..TrainParams::default() };
        let m0: PausingModel = train(&train_set, &params).unwrap();
        let m1 = train(&scaled, &params).unwrap();
        let probes = cloud(seed ^ 1, 30);
        let probes_scaled: Vec<FeatureWindow> =
            probes.iter().map(|w| FeatureWindow { features: w.features.map(|v| v * k), ..w.clone() }).collect();
        prop_assert_eq!(predict(&m0, &probes).unwrap(), predict(&m1, &probes_scaled).unwrap());
        let reloaded = PausingModel::from_json(&m0.to_json()).unwrap();
        prop_assert_eq!(&reloaded.scaler, &m0.scaler);
    }

    #[test]
    fn pause_time_bounded_and_partition_exact(labels in prop::collection::vec(any::<bool>(), 1..120)) {
        let cohort = synthesize_cohort(2, 0.6, 5).unwrap();
        let trip = synthesize(&cohort.participants[0].pre, &SimConfig::default()).unwrap();
        let start = trip.log.manifest.start_t;
        let windows: Vec<WindowLabel> = labels
            .iter()
            .enumerate()
            .map(|(i, &p)| WindowLabel {
                start_t: start + WINDOW_MS * i as i64,
                label: if p { Activity::Pausing } else { Activity::Moving },
            })
            .collect();
        let phases = segment_with_windows(&trip.log, &cohort.campus.registry, &windows, &SegmentConfig::default()).unwrap();
        let d = phases.durations().unwrap();
        prop_assert_eq!(d.prep_ms + d.building_search_ms + d.indoor_search_ms, d.total_ms);
        prop_assert!(d.pause_ms <= d.total_ms && d.pause_ms % 2000 == 0);
        prop_assert!(phases.start_t <= phases.prep_end);
        prop_assert!(phases.prep_end <= phases.entry_t.unwrap());
        prop_assert!(phases.entry_t.unwrap() <= phases.arrival_t.unwrap());
        for w in phases.pause_intervals.windows(2) {
            prop_assert!(w[0][1] < w[1][0]);
        }
        for iv in &phases.pause_intervals {
            prop_assert!(iv[0] >= start && iv[1] <= phases.arrival_t.unwrap() && (iv[1] - iv[0]) % 2000 == 0);
        }
    }
}

/// Events drawn from the whole vocabulary, in time order.
fn arb_events() -> impl Strategy<Value = Vec<SessionEvent>> {
    let target = make_campus(3, 1).registry.aeds[0].beacon.clone();
    let routine = make_campus(3, 1).registry.aeds[2].id.clone();
    prop::collection::vec((0u8..9, 0i64..4000, -90.0f64..-40.0, 0.0f64..30.0, 0usize..3), 0..80).prop_map(
        move |raw| {
            let mut t = 0;
            raw.into_iter()
                .map(|(kind, dt, rssi, d, which)| {
                    t += dt;
                    let start = GeoPoint::new(35.0, 135.0);
                    match kind {
                        0 => SessionEvent::PreSurveySubmitted { t },
                        1 => SessionEvent::ExamSelected {
                            t,
                            kind: [SessionKind::PreExam, SessionKind::Routine, SessionKind::PostExam1][which],
                            target_aed: (which == 1).then(|| routine.clone()),
                            start,
                        },
                        2 => SessionEvent::Position { t, lat: 35.0 + d / 111_195.0, lon: 135.0 },
                        3 => SessionEvent::StartPressed { t },
                        4 | 5 => SessionEvent::Tick { t },
                        6 | 7 => SessionEvent::Beacon { t, beacon: target.clone(), rssi_dbm: rssi },
                        _ => SessionEvent::SurveySubmitted { t, answers: [which as i64 + 1, 3, 3, 3, 6 - which as i64] },
                    }
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn session_gating_holds(events in arb_events()) {
        let registry = make_campus(3, 1).registry;
        let session = Session::new("P", registry, SessionConfig::default()).unwrap();
        let r = replay(session.clone(), &events);
        prop_assert_eq!(&r, &replay(session, &events));

        let mut points = 0;
        let mut pre_done = false;
        let mut verified_in_hunt = 0;
        let mut prev = SessionState::Registered;
        let mut steps = r.trajectory.iter().peekable();
        for (i, ev) in events.iter().enumerate() {
            let accepted = steps.peek().is_some_and(|s| s.index == i);
            if let SessionEvent::ExamSelected { kind, .. } = ev {
                if *kind != SessionKind::PreExam && !pre_done {
                    prop_assert!(!accepted, "routine or post exam accepted before the pre-exam");
                }
            }
            if !accepted {
                continue;
            }
            let step = steps.next().unwrap();
            prop_assert!(step.points >= points);
            points = step.points;
            if matches!(ev, SessionEvent::ExamSelected { .. }) {
                verified_in_hunt = 0;
            }
            if step.state == SessionState::Verified && prev != SessionState::Verified {
                verified_in_hunt += 1;
            }
            if step.state == SessionState::Completed && prev != SessionState::Completed {
                let by_survey = matches!(ev, SessionEvent::SurveySubmitted { .. });
                prop_assert!(by_survey);
                prop_assert_eq!(verified_in_hunt, 1);
                if let SessionEvent::SurveySubmitted { answers, .. } = ev {
                    prop_assert!(validate_survey("t", *answers).is_ok());
                }
                // the first completion can only be the pre-exam
                pre_done = true;
            }
            prev = step.state;
        }
    }
}

#[test]
fn ingestion_is_idempotent_and_round_trips() {
    let cohort = synthesize_cohort(2, 0.6, 8).unwrap();
    let trip = synthesize(&cohort.participants[1].pre, &SimConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    trip.log.write_to_dir(dir.path()).unwrap();
    let manifest = dir.path().join("manifest.json");
    let a = load_trip(&manifest, dir.path(), &cohort.campus.registry).unwrap();
    let b = load_trip(&manifest, dir.path(), &cohort.campus.registry).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.streams, trip.log.streams);
    assert_eq!(a.manifest, trip.log.manifest);
    let again = tempfile::tempdir().unwrap();
    a.write_to_dir(again.path()).unwrap();
    for name in ["accel.csv", "gyro.csv", "gps.csv", "wifi.csv", "baro.csv", "beacon.csv", "labels.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap(),
            "{name}"
        );
    }
}
