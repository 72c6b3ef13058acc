use aedtrace_core::dsp::FeatureWindow;
use aedtrace_core::pausenet::{evaluate, smote, stratified_split, train, PausingModel, TrainParams};
use aedtrace_core::sensorlog::Activity;
use aedtrace_core::simtrip::{synthesize, synthesize_cohort, training_corpus, ShapeParams, SimConfig};
use aedtrace_core::tripseg::{segment, SegmentConfig};

fn corpus() -> Vec<FeatureWindow> {
    training_corpus(24, 11, &ShapeParams::training(), &SimConfig::default()).unwrap()
}

fn trained(windows: &[FeatureWindow], seed: u64) -> (PausingModel, Vec<FeatureWindow>) {
    let (tr, ev) = stratified_split(windows, 0.7, seed).unwrap();
    let aug = smote(&tr, 5, seed).unwrap();
    let model = train(&aug.windows, &TrainParams { seed, ..TrainParams::default() }).unwrap();
    (model, ev)
}

#[test]
fn classifier_on_synthetic_corpus() {
    let w = corpus();
    let pausing = w.iter().filter(|w| w.label == Some(Activity::Pausing)).count();
    let frac = pausing as f64 / w.len() as f64;
    assert!(w.len() >= 1300, "{} windows", w.len());
    assert!((0.10..=0.18).contains(&frac), "pausing fraction {frac}");
    eprintln!("{} windows, pausing {frac:.3}", w.len());
    let (model, ev) = trained(&w, 1);
    let m = evaluate(&model, &ev).unwrap();
    eprintln!("weighted {:.3} pausing {:.3}", m.weighted_f1, m.pausing.f1);
    assert!(m.weighted_f1 >= 0.90, "{m:?}");
    assert!(m.pausing.f1 >= 0.75, "{m:?}");
}

#[test]
fn segmentation_matches_script_truth() {
    let (model, _) = trained(&corpus(), 1);
    let cohort = synthesize_cohort(25, 0.6, 21).unwrap();
    let cfg = SimConfig::default();
    let mut worst = [0i64; 3];
    for script in cohort.scripts() {
        let trip = synthesize(script, &cfg).unwrap();
        let phases = segment(&trip.log, &cohort.campus.registry, &model, &SegmentConfig::default()).unwrap();
        let t = &trip.truth;
        let got = [phases.prep_end, phases.entry_t.unwrap(), phases.arrival_t.unwrap()];
        let want = [t.prep_end, t.entry_t, t.arrival_t];
        for k in 0..3 {
            worst[k] = worst[k].max((got[k] - want[k]).abs());
        }
        let d = phases.durations().unwrap();
        assert_eq!(d.prep_ms + d.building_search_ms + d.indoor_search_ms, d.total_ms);
    }
    assert!(worst.iter().all(|&e| e <= 2000), "worst boundary errors {worst:?}");
}
