use std::fs;
use std::path::{Path, PathBuf};

use aedtrace_core::dsp::{features_from_csv, features_to_csv, FeatureWindow};
use aedtrace_core::io::{write_atomic, write_json};
use aedtrace_core::metrics::{change_counts, outcomes_from_csv, outcomes_to_csv, pair_outcomes, ChangeCounts};
use aedtrace_core::pausenet::{evaluate as eval_model, smote, stratified_split, train as fit, PausingModel, TrainParams};
use aedtrace_core::report::{
    build_report, render_csv, render_text, sus_from_csv, survey_pairs_from_csv, ReportOptions, StatReport,
};
use aedtrace_core::sensorlog::{load_registry, load_trip, Activity, BeaconId, SessionKind};
use aedtrace_core::session::{events_to_jsonl, parse_event_log, replay, Session, SessionEvent};
use aedtrace_core::simtrip::{synthesize, synthesize_cohort, training_corpus, write_trip, CohortParticipant, SimTrip};
use aedtrace_core::tripseg::{segment as segment_trip, summaries_to_csv};
use aedtrace_core::{TimestampMs, Warning};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{resolve, RunConfig};
use crate::{
    EvaluateArgs, Format, MetricsArgs, ReplayArgs, ReportArgs, SegmentArgs, SimulateArgs, StatsArgs, StatsInputs,
    TrainArgs,
};

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_doc<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(flag: Option<PathBuf>, cfg: &mut RunConfig) -> Result<PathBuf> {
    let out = resolve(flag, &mut cfg.paths.out_dir, "out")?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

/// Validates the resolved configuration and stores it beside the outputs.
/// The output directory itself is left out so the file only depends on inputs.
fn finish_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let mut saved = cfg.clone();
    saved.paths.out_dir = None;
    write_doc(&out.join("config.json"), &saved)
}

fn load_features(path: &Path) -> Result<Vec<FeatureWindow>> {
    features_from_csv(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn simulate(a: SimulateArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let out = prepare_out(a.out, cfg)?;
    let sim = &mut cfg.simulation;
    sim.cohort = a.cohort.unwrap_or(sim.cohort);
    sim.factor = a.factor.unwrap_or(sim.factor);
    sim.corpus_trips = a.corpus.unwrap_or(sim.corpus_trips);
    cfg.seed = a.seed.or(cfg.seed);
    finish_config(&out, cfg)?;
    let seed = cfg.seed();
    let sim = &cfg.simulation;

    let cohort = synthesize_cohort(sim.cohort, sim.factor, seed)?;
    write_doc(&out.join("registry.json"), &cohort.campus.registry)?;
    let trips_dir = out.join("trips");
    let scripts: Vec<_> = cohort.scripts().collect();
    scripts
        .par_iter()
        .map(|s| write_trip(&trips_dir.join(&s.trip_id), s, &sim.trace).map(|_| ()))
        .collect::<Result<Vec<()>, _>>()?;
    write_doc(&out.join("truth.json"), &cohort.truth(&sim.trace)?)?;
    write(&out.join("surveys.csv"), &cohort.surveys_csv())?;
    write(&out.join("sus.csv"), &cohort.sus_csv())?;

    let sessions = out.join("sessions");
    fs::create_dir_all(&sessions)?;
    let logs = cohort
        .participants
        .par_iter()
        .map(|p| Ok((p.participant_id.clone(), session_log(p, &synthesize(&p.pre, &sim.trace)?))))
        .collect::<Result<Vec<_>>>()?;
    for (pid, events) in logs {
        write(&sessions.join(format!("{pid}.jsonl")), events_to_jsonl(&events).as_bytes())?;
    }
    eprintln!("simulated {} participants ({} trips) in {}", cohort.participants.len(), scripts.len(), out.display());

    if sim.corpus_trips > 0 {
        let windows = training_corpus(sim.corpus_trips, seed, &sim.corpus_shape, &sim.trace)?;
        let pausing = windows.iter().filter(|w| w.label == Some(Activity::Pausing)).count();
        write(&out.join("features.csv"), &features_to_csv(&windows))?;
        eprintln!("corpus: {} windows, {pausing} pausing", windows.len());
    }
    Ok(Vec::new())
}

/// The app-side event log of a participant's pre-exam: setup, countdown,
/// once-a-second ticks interleaved with the recorded beacon sightings, and
/// the post-hunt survey.
fn session_log(p: &CohortParticipant, trip: &SimTrip) -> Vec<SessionEvent> {
    let script = &p.pre;
    let start = script.frame.to_geo(script.origin);
    let t0 = script.start_t;
    let mut events = vec![
        SessionEvent::PreSurveySubmitted { t: t0 - 60_000 },
        SessionEvent::ExamSelected {
            t: t0 - 30_000,
            kind: SessionKind::PreExam,
            target_aed: Some(script.target_aed.clone()),
            start,
        },
        SessionEvent::Position { t: t0 - 20_000, lat: start.lat, lon: start.lon },
        SessionEvent::StartPressed { t: t0 - 3_000 },
    ];
    let end = trip.truth.end_t;
    let mut timed: Vec<(TimestampMs, u8, SessionEvent)> =
        (0..).map(|k| t0 + 1000 * k).take_while(|t| *t <= end).map(|t| (t, 0, SessionEvent::Tick { t })).collect();
    timed.extend(trip.log.streams.beacon.iter().map(|b| {
        let beacon: BeaconId = b.beacon.clone();
        (b.t, 1, SessionEvent::Beacon { t: b.t, beacon, rssi_dbm: b.rssi_dbm })
    }));
    timed.sort_by_key(|(t, order, _)| (*t, *order));
    events.extend(timed.into_iter().map(|(_, _, e)| e));
    let answers = p.surveys[0].answers().map(i64::from);
    events.push(SessionEvent::Tick { t: end + 1000 });
    events.push(SessionEvent::SurveySubmitted { t: end + 2000, answers });
    events
}

#[derive(Serialize)]
struct TrainSummary {
    n_windows: usize,
    n_train: usize,
    n_holdout: usize,
    n_synthetic: usize,
    smote_k: usize,
    class_counts: [usize; 2],
    holdout: aedtrace_core::pausenet::EvalMetrics,
}

pub fn train(a: TrainArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let features = resolve(a.features, &mut cfg.paths.features, "features")?;
    let out = prepare_out(a.out, cfg)?;
    cfg.seed = a.seed.or(cfg.seed);
    cfg.classifier.c = a.c.unwrap_or(cfg.classifier.c);
    cfg.classifier.gamma = a.gamma.or(cfg.classifier.gamma);
    finish_config(&out, cfg)?;
    let (seed, c) = (cfg.seed(), &cfg.classifier);

    let windows = load_features(&features)?;
    let (train_set, holdout) = stratified_split(&windows, c.train_frac, seed)?;
    let augmented = smote(&train_set, c.smote_k, seed)?;
    let params = TrainParams { c: c.c, gamma: c.gamma, seed, tol: c.tol, max_iter: None };
    let model = fit(&augmented.windows, &params)?;
    let metrics = eval_model(&model, &holdout)?;
    write(&out.join("model.json"), model.to_json().as_bytes())?;
    write(&out.join("holdout.csv"), &features_to_csv(&holdout))?;
    write_doc(
        &out.join("train_summary.json"),
        &TrainSummary {
            n_windows: windows.len(),
            n_train: train_set.len(),
            n_holdout: holdout.len(),
            n_synthetic: augmented.n_synthetic,
            smote_k: augmented.k_used,
            class_counts: model.metadata.class_counts,
            holdout: metrics.clone(),
        },
    )?;
    eprintln!(
        "trained on {} windows ({} synthetic); holdout weighted F1 {:.3}, pausing F1 {:.3}",
        augmented.windows.len(),
        augmented.n_synthetic,
        metrics.weighted_f1,
        metrics.pausing.f1
    );
    Ok(augmented.warnings)
}

pub fn evaluate(a: EvaluateArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let model_path = resolve(a.model, &mut cfg.paths.model, "model")?;
    let features = resolve(a.features, &mut cfg.paths.features, "features")?;
    let out = prepare_out(a.out, cfg)?;
    finish_config(&out, cfg)?;
    let model = PausingModel::load(&model_path)?;
    let metrics = eval_model(&model, &load_features(&features)?)?;
    write_doc(&out.join("metrics.json"), &metrics)?;
    eprintln!("weighted F1 {:.3}, pausing F1 {:.3}", metrics.weighted_f1, metrics.pausing.f1);
    Ok(Vec::new())
}

/// Sub-directories of `data` that hold a `manifest.json`, in name order.
fn trip_dirs(data: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(data).with_context(|| format!("reading {}", data.display()))? {
        let path = entry?.path();
        if path.join("manifest.json").is_file() {
            dirs.push(path);
        }
    }
    if data.join("manifest.json").is_file() {
        dirs.push(data.to_path_buf());
    }
    dirs.sort();
    Ok(dirs)
}

pub fn segment(a: SegmentArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let data = resolve(a.data, &mut cfg.paths.data_dir, "data")?;
    let registry_path = resolve(a.registry, &mut cfg.paths.registry, "registry")?;
    let model_path = resolve(a.model, &mut cfg.paths.model, "model")?;
    let out = prepare_out(a.out, cfg)?;
    let s = &mut cfg.segment;
    s.beacon_rssi_dbm = a.beacon_rssi.unwrap_or(s.beacon_rssi_dbm);
    s.dwell_s = a.dwell.unwrap_or(s.dwell_s);
    s.wifi_rssi_dbm = a.wifi_rssi.unwrap_or(s.wifi_rssi_dbm);
    s.confirm_s = a.confirm.unwrap_or(s.confirm_s);
    finish_config(&out, cfg)?;

    let registry = load_registry(&registry_path)?;
    let model = PausingModel::load(&model_path)?;
    let dirs = trip_dirs(&data)?;
    if dirs.is_empty() {
        bail!("no trip directories with a manifest.json under {}", data.display());
    }
    let phases = dirs
        .par_iter()
        .map(|dir| {
            let log = load_trip(&dir.join("manifest.json"), dir, &registry)
                .with_context(|| format!("loading {}", dir.display()))?;
            Ok(segment_trip(&log, &registry, &model, &cfg.segment)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let reports = out.join("trips");
    fs::create_dir_all(&reports)?;
    let mut warnings = Vec::new();
    let mut summaries = Vec::with_capacity(phases.len());
    for p in &phases {
        write_doc(&reports.join(format!("{}.json", p.trip_id)), &p.report())?;
        for w in &p.warnings {
            warnings.push(Warning::new(&w.code, format!("{}: {}", p.trip_id, w.message)));
        }
        if !p.is_complete() {
            warnings.push(Warning::new("incomplete", format!("{}: arrival never verified", p.trip_id)));
        }
        summaries.push(p.summary());
    }
    write(&out.join("summaries.csv"), &summaries_to_csv(&summaries))?;
    let complete = phases.iter().filter(|p| p.is_complete()).count();
    eprintln!("segmented {} trips ({complete} complete)", phases.len());
    Ok(warnings)
}

#[derive(Serialize)]
struct PairingDoc {
    n_participants: usize,
    change: ChangeCounts,
    warnings: Vec<Warning>,
}

pub fn metrics(a: MetricsArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let path = resolve(a.summaries, &mut cfg.paths.summaries, "summaries")?;
    let out = prepare_out(a.out, cfg)?;
    finish_config(&out, cfg)?;
    let summaries = aedtrace_core::tripseg::summaries_from_csv(&read(&path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    let pairing = pair_outcomes(&summaries);
    write(&out.join("outcomes.csv"), &outcomes_to_csv(&pairing.outcomes))?;
    let doc = PairingDoc {
        n_participants: pairing.outcomes.len(),
        change: change_counts(&pairing.outcomes),
        warnings: pairing.warnings.clone(),
    };
    write_doc(&out.join("pairing.json"), &doc)?;
    eprintln!(
        "{} paired participants: {} improved, {} worsened",
        doc.n_participants, doc.change.improved, doc.change.worsened
    );
    Ok(pairing.warnings)
}

fn stat_report(inputs: StatsInputs, cfg: &mut RunConfig) -> Result<StatReport> {
    let outcomes_path = resolve(inputs.outcomes, &mut cfg.paths.outcomes, "outcomes")?;
    if inputs.surveys.is_some() {
        cfg.paths.surveys = inputs.surveys;
    }
    if inputs.sus.is_some() {
        cfg.paths.sus = inputs.sus;
    }
    cfg.seed = inputs.seed.or(cfg.seed);
    cfg.validate()?;
    let outcomes = outcomes_from_csv(&read(&outcomes_path)?)
        .with_context(|| format!("parsing {}", outcomes_path.display()))?;
    let surveys = match &cfg.paths.surveys {
        Some(p) => survey_pairs_from_csv(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let sus = match &cfg.paths.sus {
        Some(p) => sus_from_csv(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let opts = ReportOptions { hl: cfg.report.hl_options(cfg.seed()) };
    Ok(build_report(&outcomes, &surveys, &sus, &opts)?)
}

pub fn stats(a: StatsArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let out = prepare_out(a.out, cfg)?;
    let report = stat_report(a.inputs, cfg)?;
    finish_config(&out, cfg)?;
    write_doc(&out.join("stat_report.json"), &report)?;
    if let Some(total) = report.efficiency.iter().find(|r| r.group == "All" && r.scope == "Total") {
        eprintln!(
            "{} participants; total duration change {:.1} s, p = {:.4}",
            report.n_participants, total.change.estimate, total.p
        );
    }
    Ok(Vec::new())
}

pub fn report(a: ReportArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let report: StatReport = match a.stat_report {
        Some(path) => serde_json::from_slice(&read(&path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => stat_report(a.inputs, cfg)?,
    };
    if report.n_participants == 0 {
        bail!("no complete trips");
    }
    let text = match a.format {
        Format::Txt => render_text(&report),
        Format::Csv => render_csv(&report)?,
    };
    match a.out {
        Some(path) => write(&path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(Vec::new())
}

pub fn session_replay(a: ReplayArgs, cfg: &mut RunConfig) -> Result<Vec<Warning>> {
    let events_path = resolve(a.events, &mut cfg.paths.events, "events")?;
    let registry_path = resolve(a.registry, &mut cfg.paths.registry, "registry")?;
    let out = prepare_out(a.out, cfg)?;
    finish_config(&out, cfg)?;
    let participant = match a.participant {
        Some(p) => p,
        None => events_path
            .file_stem()
            .and_then(|s| s.to_str())
            .context("cannot derive a participant id from the event file name; pass --participant")?
            .to_owned(),
    };
    let text = String::from_utf8(read(&events_path)?).context("event log is not UTF-8")?;
    let events = parse_event_log(&text).with_context(|| format!("parsing {}", events_path.display()))?;
    let registry = load_registry(&registry_path)?;
    let session = Session::new(&participant, registry, cfg.session.clone())?;
    let result = replay(session, &events);
    write_doc(&out.join("replay.json"), &result)?;
    eprintln!(
        "{participant}: {} events, {} rejected, final state {:?}, {} point(s)",
        events.len(),
        result.rejections.len(),
        result.record.final_state,
        result.record.points
    );
    Ok(result
        .rejections
        .iter()
        .map(|r| Warning::new("rejected_event", format!("event {} ({}): {}", r.index, r.event, r.reason)))
        .collect())
}
