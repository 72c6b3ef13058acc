//! Pre/post comparison tables built from paired outcomes and survey ratings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{change_counts, ParticipantOutcome};
use crate::sensorlog::Guidance;
use crate::stats::{
    holm_adjust, hodges_lehmann, mann_whitney_u, median_iqr, sus_summary, wilcoxon_signed_rank, EstimateWithCI,
    HlOptions, MedianIqr, StatsError, SusSummary, Tail, TestMethod,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no complete trips")]
    NoCompleteTrips,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("survey table: {0}")]
    Survey(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const GROUPS: [&str; 3] = ["All", "Map", "No-Map"];

fn in_group(label: &str, g: Guidance) -> bool {
    match label {
        "Map" => g == Guidance::Map,
        "No-Map" => g == Guidance::NoMap,
        _ => true,
    }
}

/// One paired comparison (second condition minus first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub group: String,
    pub scope: String,
    pub n: usize,
    pub before: MedianIqr,
    pub after: MedianIqr,
    /// Location of `after - before`.
    pub change: EstimateWithCI,
    pub statistic: Option<f64>,
    /// 1 when every difference is zero.
    pub p: f64,
    pub p_adjusted: Option<f64>,
    pub method: Option<TestMethod>,
}

impl ComparisonRow {
    pub fn reported_p(&self) -> f64 {
        self.p_adjusted.unwrap_or(self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub group: String,
    pub n: usize,
    pub delta_d_t: MedianIqr,
    pub improved: usize,
    pub worsened: usize,
    /// Participants with a defined pause reduction.
    pub n_delta_d_p: usize,
    pub delta_d_p: Option<MedianIqr>,
}

/// Map versus no-map, two-sided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub measure: String,
    pub n_map: usize,
    pub n_no_map: usize,
    pub median_map: f64,
    pub median_no_map: f64,
    pub u: f64,
    pub p: f64,
    pub method: TestMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub n_participants: usize,
    /// Totals, phases and pause time, pre-exam versus first post-exam.
    pub efficiency: Vec<ComparisonRow>,
    pub deltas: Vec<DeltaRow>,
    pub group_comparisons: Vec<GroupComparison>,
    /// First versus second visit ratings.
    pub survey: Vec<ComparisonRow>,
    pub sus: Option<SusSummary>,
}

/// Ratings of one participant at the first and second visit to an AED.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPair {
    pub participant_id: String,
    pub group: Guidance,
    pub first: [u8; 5],
    pub second: [u8; 5],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportOptions {
    pub hl: HlOptions,
}

fn compare(
    group: &str,
    scope: &str,
    before: &[f64],
    after: &[f64],
    tail: Tail,
    hl: &HlOptions,
) -> Result<ComparisonRow, StatsError> {
    let diffs: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).collect();
    let (statistic, p, method) = match wilcoxon_signed_rank(&diffs, tail) {
        Ok(r) => (Some(r.statistic), r.p, Some(r.method)),
        Err(StatsError::AllZero) => (None, 1.0, None),
        Err(e) => return Err(e),
    };
    Ok(ComparisonRow {
        group: group.to_owned(),
        scope: scope.to_owned(),
        n: diffs.len(),
        before: median_iqr(before)?,
        after: median_iqr(after)?,
        change: hodges_lehmann(&diffs, hl)?,
        statistic,
        p,
        p_adjusted: None,
        method,
    })
}

fn adjust(rows: &mut [ComparisonRow], members: &[usize]) -> Result<(), StatsError> {
    let p: Vec<f64> = members.iter().map(|&i| rows[i].p).collect();
    for (&i, adj) in members.iter().zip(holm_adjust(&p)?) {
        rows[i].p_adjusted = Some(adj);
    }
    Ok(())
}

type Measure = fn(&ParticipantOutcome) -> (f64, f64);

const PHASES: [(&str, Measure); 3] = [
    ("Preparation", |o| (o.prep_pre, o.prep_post)),
    ("Building Search", |o| (o.building_search_pre, o.building_search_post)),
    ("Indoor AED Search", |o| (o.indoor_search_pre, o.indoor_search_post)),
];

/// Builds every table. The pooled total and pooled pause rows are primary and
/// unadjusted; the per-group totals form one Holm family, the per-group pause
/// rows another, and the three phases within each group a family of three.
/// Survey questions are adjusted across the five questions within each group.
pub fn build_report(
    outcomes: &[ParticipantOutcome],
    surveys: &[SurveyPair],
    sus: &[Vec<u8>],
    opts: &ReportOptions,
) -> Result<StatReport, ReportError> {
    if outcomes.is_empty() {
        return Err(ReportError::NoCompleteTrips);
    }
    let hl = &opts.hl;
    let mut efficiency = Vec::new();
    let mut totals = Vec::new();
    let mut pauses = Vec::new();
    let mut phase_families = Vec::new();
    for (scope, pick, idx) in [
        ("Total", (|o| (o.d_t_pre, o.d_t_post)) as Measure, &mut totals),
        ("Pause", |o| (o.d_p_pre, o.d_p_post), &mut pauses),
    ] {
        for g in GROUPS {
            let sel: Vec<(f64, f64)> = outcomes.iter().filter(|o| in_group(g, o.group)).map(pick).collect();
            if sel.is_empty() {
                continue;
            }
            let (pre, post): (Vec<f64>, Vec<f64>) = sel.into_iter().unzip();
            if g != "All" {
                idx.push(efficiency.len());
            }
            efficiency.push(compare(g, scope, &pre, &post, Tail::Less, hl)?);
        }
    }
    for g in GROUPS {
        let group: Vec<&ParticipantOutcome> = outcomes.iter().filter(|o| in_group(g, o.group)).collect();
        if group.is_empty() {
            continue;
        }
        let mut family = Vec::new();
        for (scope, pick) in PHASES {
            let (pre, post): (Vec<f64>, Vec<f64>) = group.iter().map(|o| pick(o)).unzip();
            family.push(efficiency.len());
            efficiency.push(compare(g, scope, &pre, &post, Tail::Less, hl)?);
        }
        phase_families.push(family);
    }
    adjust(&mut efficiency, &totals)?;
    adjust(&mut efficiency, &pauses)?;
    for f in &phase_families {
        adjust(&mut efficiency, f)?;
    }
    // Display order: totals, phases, pauses.
    efficiency.sort_by_key(|r| match r.scope.as_str() {
        "Total" => 0,
        "Pause" => 2,
        _ => 1,
    });

    let mut deltas = Vec::new();
    for g in GROUPS {
        let group: Vec<ParticipantOutcome> =
            outcomes.iter().filter(|o| in_group(g, o.group)).cloned().collect();
        if group.is_empty() {
            continue;
        }
        let dt: Vec<f64> = group.iter().map(|o| o.delta_d_t).collect();
        let dp: Vec<f64> = group.iter().filter_map(|o| o.delta_d_p).collect();
        let counts = change_counts(&group);
        deltas.push(DeltaRow {
            group: g.to_owned(),
            n: group.len(),
            delta_d_t: median_iqr(&dt)?,
            improved: counts.improved,
            worsened: counts.worsened,
            n_delta_d_p: dp.len(),
            delta_d_p: if dp.is_empty() { None } else { Some(median_iqr(&dp)?) },
        });
    }

    let mut group_comparisons = Vec::new();
    let split = |f: fn(&ParticipantOutcome) -> Option<f64>| {
        let part = |g| outcomes.iter().filter(|o| o.group == g).filter_map(f).collect::<Vec<f64>>();
        (part(Guidance::Map), part(Guidance::NoMap))
    };
    for (measure, f) in [
        ("delta_D_T", (|o| Some(o.delta_d_t)) as fn(&ParticipantOutcome) -> Option<f64>),
        ("delta_D_P", |o| o.delta_d_p),
    ] {
        let (map, no_map) = split(f);
        if map.is_empty() || no_map.is_empty() {
            continue;
        }
        let r = mann_whitney_u(&map, &no_map, Tail::TwoSided)?;
        group_comparisons.push(GroupComparison {
            measure: measure.to_owned(),
            n_map: map.len(),
            n_no_map: no_map.len(),
            median_map: median_iqr(&map)?.median,
            median_no_map: median_iqr(&no_map)?.median,
            u: r.statistic,
            p: r.p,
            method: r.method,
        });
    }

    let mut survey = Vec::new();
    for g in GROUPS {
        let group: Vec<&SurveyPair> = surveys.iter().filter(|s| in_group(g, s.group)).collect();
        if group.is_empty() {
            continue;
        }
        let mut family = Vec::new();
        for q in 0..5 {
            let first: Vec<f64> = group.iter().map(|s| f64::from(s.first[q])).collect();
            let second: Vec<f64> = group.iter().map(|s| f64::from(s.second[q])).collect();
            family.push(survey.len());
            survey.push(compare(g, &format!("Q{}", q + 1), &first, &second, Tail::Greater, hl)?);
        }
        adjust(&mut survey, &family)?;
    }

    let sus = if sus.is_empty() { None } else { Some(sus_summary(sus)?) };
    Ok(StatReport {
        n_participants: outcomes.len(),
        efficiency,
        deltas,
        group_comparisons,
        survey,
        sus,
    })
}

/// `*` below .05, `**` below .01, `***` below .001, otherwise the value.
pub fn significance(p: f64) -> String {
    match p {
        p if p < 0.001 => "***".into(),
        p if p < 0.01 => "**".into(),
        p if p < 0.05 => "*".into(),
        p => format!("{p:.3}"),
    }
}

fn fmt_miqr(m: &MedianIqr) -> String {
    format!("{:.1} ({:.1}, {:.1})", m.median, m.q1, m.q3)
}

fn fmt_miqr2(m: &MedianIqr) -> String {
    format!("{:.2} ({:.2}-{:.2})", m.median, m.q1, m.q3)
}

fn pct(k: usize, n: usize) -> String {
    format!("{k}/{n} ({:.1}%)", 100.0 * k as f64 / n as f64)
}

fn aligned(title: &str, header: &[&str], rows: &[Vec<String>], right_from: usize) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i >= right_from {
                let _ = write!(s, "{c:>w$}");
            } else {
                let _ = write!(s, "{c:<w$}");
            }
        }
        s.trim_end().to_owned() + "\n"
    };
    let rule = "-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)) + "\n";
    let mut out = format!("{title}\n{rule}");
    out += &line(header.to_vec());
    out += &rule;
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out + &rule
}

fn comparison_cells(r: &ComparisonRow) -> Vec<String> {
    vec![
        r.group.clone(),
        r.scope.clone(),
        r.n.to_string(),
        fmt_miqr(&r.before),
        fmt_miqr(&r.after),
        format!("{:.1}", r.change.estimate),
        format!("[{:.1}, {:.1}]", r.change.ci_low, r.change.ci_high),
        significance(r.reported_p()),
    ]
}

/// Plain-text tables with aligned columns.
pub fn render_text(report: &StatReport) -> String {
    let mut out = String::new();
    let rows: Vec<Vec<String>> = report.efficiency.iter().map(comparison_cells).collect();
    out += &aligned(
        "Retrieval time, pre-exam vs post-exam I (s). One-tailed paired Wilcoxon; All/Total and All/Pause unadjusted, others Holm-adjusted.",
        &["Group", "Scope", "N", "Pre median (IQR)", "Post median (IQR)", "HL change", "95% CI", "Adj. p"],
        &rows,
        2,
    );
    out.push('\n');
    let rows: Vec<Vec<String>> = report
        .deltas
        .iter()
        .map(|d| {
            vec![
                d.group.clone(),
                d.n.to_string(),
                fmt_miqr2(&d.delta_d_t),
                pct(d.improved, d.n),
                pct(d.worsened, d.n),
                d.delta_d_p.as_ref().map_or("n/a".into(), fmt_miqr2),
            ]
        })
        .collect();
    out += &aligned(
        "Relative reductions",
        &["Group", "N", "Median dD_T (IQR)", "Improved", "Worsened", "Median dD_P (IQR)"],
        &rows,
        1,
    );
    if !report.group_comparisons.is_empty() {
        out.push('\n');
        let rows: Vec<Vec<String>> = report
            .group_comparisons
            .iter()
            .map(|g| {
                vec![
                    g.measure.clone(),
                    format!("{:.2} (n={})", g.median_map, g.n_map),
                    format!("{:.2} (n={})", g.median_no_map, g.n_no_map),
                    format!("{:.1}", g.u),
                    format!("{:.3}", g.p),
                ]
            })
            .collect();
        out += &aligned(
            "Map vs No-Map, two-sided Mann-Whitney U",
            &["Measure", "Map median", "No-Map median", "U", "p"],
            &rows,
            1,
        );
    }
    if !report.survey.is_empty() {
        out.push('\n');
        let rows: Vec<Vec<String>> = report.survey.iter().map(comparison_cells).collect();
        out += &aligned(
            "In-app survey, first vs second visit. One-tailed paired Wilcoxon, Holm within group.",
            &["Group", "Question", "N", "First median (IQR)", "Second median (IQR)", "HL change", "95% CI", "Adj. p"],
            &rows,
            2,
        );
    }
    if let Some(s) = &report.sus {
        let _ = write!(out, "\nSUS: {:.1} +/- {:.1} (n={})\n", s.mean, s.sd, s.scores.len());
    }
    out
}

/// One CSV row per comparison; `table` names the section.
pub fn render_csv(report: &StatReport) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "table", "group", "scope", "n", "before_median", "before_q1", "before_q3", "after_median", "after_q1",
        "after_q3", "hl", "ci_low", "ci_high", "statistic", "p", "p_adjusted", "significance",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for (table, rows) in [("efficiency", &report.efficiency), ("survey", &report.survey)] {
        for r in rows {
            w.write_record([
                table.to_owned(),
                r.group.clone(),
                r.scope.clone(),
                r.n.to_string(),
                r.before.median.to_string(),
                r.before.q1.to_string(),
                r.before.q3.to_string(),
                r.after.median.to_string(),
                r.after.q1.to_string(),
                r.after.q3.to_string(),
                r.change.estimate.to_string(),
                r.change.ci_low.to_string(),
                r.change.ci_high.to_string(),
                opt(r.statistic),
                r.p.to_string(),
                opt(r.p_adjusted),
                significance(r.reported_p()),
            ])?;
        }
    }
    for d in &report.deltas {
        let dp = d.delta_d_p.as_ref();
        w.write_record([
            "delta".to_owned(),
            d.group.clone(),
            "delta_D_T".into(),
            d.n.to_string(),
            d.delta_d_t.median.to_string(),
            d.delta_d_t.q1.to_string(),
            d.delta_d_t.q3.to_string(),
            opt(dp.map(|m| m.median)),
            opt(dp.map(|m| m.q1)),
            opt(dp.map(|m| m.q3)),
            String::new(),
            String::new(),
            String::new(),
            format!("improved={} worsened={}", d.improved, d.worsened),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for g in &report.group_comparisons {
        w.write_record([
            "group_comparison".to_owned(),
            "Map vs No-Map".into(),
            g.measure.clone(),
            (g.n_map + g.n_no_map).to_string(),
            g.median_map.to_string(),
            String::new(),
            String::new(),
            g.median_no_map.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            g.u.to_string(),
            g.p.to_string(),
            String::new(),
            significance(g.p),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Survey(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[derive(Debug, Deserialize)]
struct SurveyCsvRow {
    participant_id: String,
    group: Guidance,
    visit: u8,
    q1: u8,
    q2: u8,
    q3: u8,
    q4: u8,
    q5: u8,
}

type Visits = (Guidance, Option<[u8; 5]>, Option<[u8; 5]>);

/// Reads `participant_id,group,visit,trip_id,q1..q5`. Participants without
/// both visit 1 and visit 2 are skipped.
pub fn survey_pairs_from_csv(bytes: &[u8]) -> Result<Vec<SurveyPair>, ReportError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut by_pid: std::collections::BTreeMap<String, Visits> = Default::default();
    for row in rdr.deserialize::<SurveyCsvRow>() {
        let r = row?;
        let answers = [r.q1, r.q2, r.q3, r.q4, r.q5];
        crate::sensorlog::validate_survey(&r.participant_id, answers.map(i64::from))
            .map_err(|e| ReportError::Survey(format!("{}: {e}", r.participant_id)))?;
        let slot = by_pid.entry(r.participant_id.clone()).or_insert((r.group, None, None));
        match r.visit {
            1 => slot.1 = Some(answers),
            2 => slot.2 = Some(answers),
            v => return Err(ReportError::Survey(format!("{}: visit {v} is not 1 or 2", r.participant_id))),
        }
    }
    Ok(by_pid
        .into_iter()
        .filter_map(|(pid, (group, a, b))| {
            Some(SurveyPair { participant_id: pid, group, first: a?, second: b? })
        })
        .collect())
}

/// Reads `participant_id,item1..item10`.
pub fn sus_from_csv(bytes: &[u8]) -> Result<Vec<Vec<u8>>, ReportError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let items = row
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<u8>().map_err(|e| ReportError::Survey(format!("SUS item `{v}`: {e}"))))
            .collect::<Result<Vec<u8>, _>>()?;
        out.push(items);
    }
    Ok(out)
}
