use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dgp::DgpConfig;
use super::harness::{Analysis, HarnessOptions, PropensityModel, VarianceChoice};
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::weights::WeightScheme;

/// File form of a simulation study.
///
/// ```toml
/// [dgp]
/// n = 500
/// p = 3
/// overlap = 3.0
/// heterogeneity = 1.0
///
/// [harness]
/// replicates = 1000
/// seed = 20240501
/// propensity_model = "logistic"   # or "intercept_only"
/// ci_level = 0.95
///
/// [[analysis]]
/// scheme = "overlap"
/// method = "hajek"                # hajek | augmented | ps_adjusted_regression
/// variance = "sandwich"           # none | sandwich | bootstrap[:reps]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dgp: DgpConfig,
    #[serde(default)]
    pub harness: HarnessSection,
    #[serde(rename = "analysis")]
    pub analyses: Vec<AnalysisEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    #[serde(default = "default_reps")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_model")]
    pub propensity_model: PropensityModel,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

impl Default for HarnessSection {
    fn default() -> Self {
        Self {
            replicates: default_reps(),
            seed: 0,
            propensity_model: default_model(),
            ci_level: default_level(),
        }
    }
}

fn default_reps() -> usize {
    1000
}
fn default_model() -> PropensityModel {
    PropensityModel::Logistic
}
fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisEntry {
    pub scheme: String,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_variance")]
    pub variance: String,
}

fn default_method() -> String {
    "hajek".into()
}
fn default_variance() -> String {
    "none".into()
}

impl AnalysisEntry {
    pub fn resolve(&self) -> Result<Analysis> {
        let method = match self.method.as_str() {
            "hajek" => Method::Hajek,
            "augmented" => Method::Augmented,
            "ps_adjusted_regression" => Method::PsAdjustedRegression,
            other => return Err(Error::Config(format!("analysis.method: unknown `{other}`"))),
        };
        let scheme: WeightScheme = self
            .scheme
            .parse()
            .map_err(|e| Error::Config(format!("analysis.scheme: {e}")))?;
        let variance: VarianceChoice = self
            .variance
            .parse()
            .map_err(|e| Error::Config(format!("analysis.variance: {e}")))?;
        Ok(Analysis {
            scheme,
            method,
            variance,
        })
    }
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.dgp.validate()?;
        cfg.resolve_analyses()?;
        if !(cfg.harness.ci_level > 0.0 && cfg.harness.ci_level < 1.0) {
            return Err(Error::Config("harness.ci_level must lie in (0, 1)".into()));
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn resolve_analyses(&self) -> Result<Vec<Analysis>> {
        self.analyses.iter().map(AnalysisEntry::resolve).collect()
    }

    pub fn options(&self) -> HarnessOptions {
        HarnessOptions {
            propensity_model: self.harness.propensity_model,
            ci_level: self.harness.ci_level,
        }
    }
}
