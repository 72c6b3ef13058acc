use std::path::{Path, PathBuf};

use aedtrace_core::session::SessionConfig;
use aedtrace_core::simtrip::{ShapeParams, SimConfig};
use aedtrace_core::stats::{CiMethod, HlEstimator, HlOptions};
use aedtrace_core::tripseg::SegmentConfig;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Everything a run depends on. Loaded from `--config`, then overridden by
/// command-line flags; the resolved copy is written next to the outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub segment: SegmentConfig,
    pub classifier: ClassifierConfig,
    pub simulation: SimulationConfig,
    pub report: ReportConfig,
    pub session: SessionConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub summaries: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    pub surveys: Option<PathBuf>,
    pub sus: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub c: f64,
    /// `None` uses `1 / (dim * mean feature variance)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub train_frac: f64,
    pub smote_k: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { c: 1.0, gamma: None, tol: 1e-3, train_frac: 0.7, smote_k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub cohort: usize,
    pub factor: f64,
    pub corpus_trips: usize,
    pub corpus_shape: ShapeParams,
    pub trace: SimConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            cohort: 20,
            factor: 0.6,
            corpus_trips: 24,
            corpus_shape: ShapeParams::training(),
            trace: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub level: f64,
    pub ci: CiMethod,
    pub estimator: HlEstimator,
    pub resamples: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        let hl = HlOptions::default();
        Self { level: hl.level, ci: hl.ci, estimator: hl.estimator, resamples: hl.resamples }
    }
}

impl ReportConfig {
    pub fn hl_options(&self, seed: u64) -> HlOptions {
        HlOptions { level: self.level, ci: self.ci, estimator: self.estimator, resamples: self.resamples, seed }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.segment.validate()?;
        let c = &self.classifier;
        if !(c.c > 0.0) || c.gamma.is_some_and(|g| !(g > 0.0)) || !(c.tol > 0.0) {
            bail!("classifier C, gamma and tolerance must be positive");
        }
        if !(c.train_frac > 0.0 && c.train_frac < 1.0) {
            bail!("train fraction {} outside (0, 1)", c.train_frac);
        }
        if c.smote_k == 0 {
            bail!("SMOTE k must be at least 1");
        }
        let s = &self.session;
        if !(-120.0..=0.0).contains(&s.beacon_rssi_dbm) || s.dwell_s < 1 {
            bail!("session beacon threshold must lie in [-120, 0] dBm with dwell >= 1 s");
        }
        let r = &self.report;
        if !(r.level > 0.0 && r.level < 1.0) || r.resamples == 0 {
            bail!("report level must lie in (0, 1) with at least one resample");
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Flag value if given, else the config value, else an error naming the flag.
pub fn resolve(flag: Option<PathBuf>, slot: &mut Option<PathBuf>, name: &str) -> Result<PathBuf> {
    if flag.is_some() {
        *slot = flag;
    }
    slot.clone().with_context(|| format!("missing --{name} (or paths.{} in the config)", name.replace('-', "_")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "segment": {"dwell_s": 5}}"#).unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.segment.dwell_s, 5);
        assert_eq!(c.segment.beacon_rssi_dbm, -70.0);
        assert_eq!(c.classifier, ClassifierConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 3}"#).is_err());
    }

    #[test]
    fn out_of_range_thresholds_fail_validation() {
        let mut c = RunConfig::default();
        c.segment.beacon_rssi_dbm = 5.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.classifier.train_frac = 1.0;
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
