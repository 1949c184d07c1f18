use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, DgpConfig};
use super::oracle::{true_estimands, TrueEstimands};
use crate::data::{format_real, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{self, Method, OutcomeModelFit, VarianceMethod};
use crate::inference::{self, Recipe};
use crate::propensity::{self, FitOptions, PropensityFit};
use crate::rng::derive_seed;
use crate::weights::{self, Tilting, WeightScheme};

/// Largest tolerated share of failed replicates per analysis.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityModel {
    /// Logistic regression on every covariate.
    Logistic,
    /// Intercept only: the known-design score of a randomized trial.
    InterceptOnly,
}

impl PropensityModel {
    pub fn fit_options(self) -> FitOptions {
        match self {
            PropensityModel::Logistic => FitOptions::default(),
            PropensityModel::InterceptOnly => FitOptions::intercept_only(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceChoice {
    None,
    Sandwich,
    Bootstrap { reps: usize },
}

impl fmt::Display for VarianceChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarianceChoice::None => f.write_str("none"),
            VarianceChoice::Sandwich => f.write_str("sandwich"),
            VarianceChoice::Bootstrap { reps } => write!(f, "bootstrap:{reps}"),
        }
    }
}

impl FromStr for VarianceChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "none" => Ok(VarianceChoice::None),
            None if s == "sandwich" => Ok(VarianceChoice::Sandwich),
            None if s == "bootstrap" => Ok(VarianceChoice::Bootstrap { reps: 200 }),
            Some(("bootstrap", reps)) => reps
                .parse()
                .map(|reps| VarianceChoice::Bootstrap { reps })
                .map_err(|_| Error::Config(format!("bad bootstrap replicate count `{reps}`"))),
            _ => Err(Error::Config(format!("unknown variance method `{s}`"))),
        }
    }
}

/// One estimator evaluated in every replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analysis {
    pub scheme: WeightScheme,
    pub method: Method,
    pub variance: VarianceChoice,
}

impl Analysis {
    pub fn hajek(scheme: WeightScheme, variance: VarianceChoice) -> Self {
        Self {
            scheme,
            method: Method::Hajek,
            variance,
        }
    }

    pub fn label(&self) -> String {
        let method = match self.method {
            Method::Hajek => "hajek",
            Method::Augmented => "augmented",
            Method::PsAdjustedRegression => "ps_adjusted_regression",
        };
        format!("{}/{}/{}", self.scheme, method, self.variance)
    }

    /// Tilting that defines the estimand this analysis is judged against.
    pub fn target(&self) -> Result<Tilting> {
        match (self.method, self.scheme) {
            (Method::PsAdjustedRegression, _) => Ok(Tilting::Overlap),
            (_, WeightScheme::Trimmed { .. }) => Ok(Tilting::Ate),
            (_, WeightScheme::GeneralizedOverlap) => Ok(Tilting::Overlap),
            (_, s) => s
                .tilting()
                .ok_or_else(|| Error::Simulation(format!("no target for `{s}`"))),
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.method, self.variance) {
            (Method::Hajek, VarianceChoice::Sandwich) => match self.scheme {
                WeightScheme::Trimmed { .. } | WeightScheme::GeneralizedOverlap => Err(
                    Error::Config(format!("no sandwich variance for `{}`", self.scheme)),
                ),
                _ => Ok(()),
            },
            (_, VarianceChoice::Sandwich) => Err(Error::Config(
                "sandwich variance is only available for Hájek estimates".into(),
            )),
            (Method::Augmented, _) if self.scheme.tilting().is_none() => Err(Error::Config(
                format!("augmented estimator needs a tilting scheme, got `{}`", self.scheme),
            )),
            (_, VarianceChoice::Bootstrap { reps }) if reps < 100 => Err(Error::Config(
                "bootstrap needs at least 100 replicates".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessOptions {
    pub propensity_model: PropensityModel,
    pub ci_level: f64,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            propensity_model: PropensityModel::Logistic,
            ci_level: 0.95,
        }
    }
}

/// Outcome of one analysis in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub point: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    /// Per-arm ESS of the weights (weighting estimators only).
    pub ess: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub label: String,
    pub scheme: WeightScheme,
    pub method: Method,
    pub variance_method: VarianceMethod,
    pub estimand: String,
    pub truth: f64,
    pub successes: usize,
    pub failures: usize,
    pub mean_point: f64,
    pub bias: f64,
    /// Standard deviation of the points (divisor `R`).
    pub empirical_sd: f64,
    pub variance: f64,
    pub rmse: f64,
    pub mcse_bias: f64,
    pub mean_se: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_ess: Option<Vec<f64>>,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub config: DgpConfig,
    pub propensity_model: PropensityModel,
    pub ci_level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub truths: TrueEstimands,
    pub analyses: Vec<AnalysisSummary>,
}

impl SimulationResult {
    pub fn analysis(&self, label: &str) -> Option<&AnalysisSummary> {
        self.analyses.iter().find(|a| a.label == label)
    }

    /// Long-format CSV of per-replicate results, one row per (replicate,
    /// analysis) in replicate order.
    pub fn write_replicates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["replicate", "analysis", "point", "se", "lower", "upper", "ess_0", "ess_1"])?;
        let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
        let mut rows: Vec<(usize, usize, &ReplicateRecord)> = self
            .analyses
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.records.iter().map(move |r| (r.replicate, a, r)))
            .collect();
        rows.sort_by_key(|&(r, a, _)| (r, a));
        for (_, a, rec) in rows {
            let ess = rec.ess.as_deref().unwrap_or(&[]);
            out.write_record([
                rec.replicate.to_string(),
                self.analyses[a].label.clone(),
                format_real(rec.point),
                opt(rec.se),
                opt(rec.ci.map(|c| c.0)),
                opt(rec.ci.map(|c| c.1)),
                opt(ess.first().copied()),
                opt(ess.get(1).copied()),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

struct ReplicateContext<'a> {
    data: &'a Dataset,
    fit: &'a PropensityFit,
    outcome_model: Option<&'a OutcomeModelFit>,
    seed: u64,
    fit_options: &'a FitOptions,
    ci_level: f64,
}

fn run_analysis(
    ctx: &ReplicateContext<'_>,
    analysis: &Analysis,
    index: usize,
    replicate: usize,
) -> Result<ReplicateRecord> {
    let design = ctx.data.design();
    let (mut estimate, ess) = match analysis.method {
        Method::Hajek => {
            let w = weights::compute_weights(ctx.fit, design, analysis.scheme)?;
            let est = estimators::hajek_estimate(ctx.data, &w, (1, 0))?;
            (est, Some(w.ess_per_arm))
        }
        Method::Augmented => {
            let om = ctx
                .outcome_model
                .ok_or_else(|| Error::Internal("outcome model missing".into()))?;
            (
                estimators::augmented_estimate(ctx.data, ctx.fit, analysis.scheme, om)?,
                None,
            )
        }
        Method::PsAdjustedRegression => (estimators::ps_adjusted_regression(ctx.data, ctx.fit)?, None),
    };
    let variance = match analysis.variance {
        VarianceChoice::None => None,
        VarianceChoice::Sandwich => Some(inference::sandwich_variance(
            ctx.data,
            ctx.fit,
            analysis.scheme,
            &estimate,
        )?),
        VarianceChoice::Bootstrap { reps } => {
            let recipe = Recipe {
                scheme: analysis.scheme,
                method: analysis.method,
                contrast: (1, 0),
                fit_options: ctx.fit_options.clone(),
                outcome_family: ctx.data.family(),
            };
            Some(inference::bootstrap_variance(
                ctx.data,
                &recipe,
                reps,
                derive_seed(ctx.seed, index as u64 + 1),
            )?)
        }
    };
    if let Some(v) = &variance {
        inference::attach(&mut estimate, v, ctx.ci_level)?;
    }
    Ok(ReplicateRecord {
        replicate,
        point: estimate.point,
        se: estimate.se,
        ci: estimate.ci.map(|c| (c.lower, c.upper)),
        ess,
    })
}

/// Per-replicate results for every analysis; `Err` marks a failure.
fn run_replicate(
    config: &DgpConfig,
    analyses: &[Analysis],
    options: &HarnessOptions,
    fit_options: &FitOptions,
    replicate: usize,
    seed: u64,
) -> Vec<Option<ReplicateRecord>> {
    let data = match generate(config, seed) {
        Ok(d) => d,
        Err(_) => return vec![None; analyses.len()],
    };
    let fit = match propensity::fit(data.design(), fit_options) {
        Ok(f) => f,
        Err(_) => return vec![None; analyses.len()],
    };
    let needs_outcome_model = analyses.iter().any(|a| a.method == Method::Augmented);
    let outcome_model = if needs_outcome_model {
        estimators::fit_outcome_regression(&data, data.family()).ok()
    } else {
        None
    };
    let ctx = ReplicateContext {
        data: &data,
        fit: &fit,
        outcome_model: outcome_model.as_ref(),
        seed,
        fit_options,
        ci_level: options.ci_level,
    };
    analyses
        .iter()
        .enumerate()
        .map(|(k, a)| run_analysis(&ctx, a, k, replicate).ok())
        .collect()
}

fn summarize(
    analysis: &Analysis,
    truths: &TrueEstimands,
    records: Vec<ReplicateRecord>,
    replicates: usize,
) -> Result<AnalysisSummary> {
    let target = analysis.target()?;
    let truth = truths.get(target);
    let m = records.len();
    let failures = replicates - m;
    let label = analysis.label();
    if failures as f64 > MAX_FAILURE_SHARE * replicates as f64 || m == 0 {
        return Err(Error::Simulation(format!(
            "{failures} of {replicates} replicates failed for `{label}`"
        )));
    }
    let mf = m as f64;
    let mean_point = records.iter().map(|r| r.point).sum::<f64>() / mf;
    let variance = records.iter().map(|r| (r.point - mean_point).powi(2)).sum::<f64>() / mf;
    let bias = mean_point - truth;
    let rmse = (records.iter().map(|r| (r.point - truth).powi(2)).sum::<f64>() / mf).sqrt();
    let ses: Vec<f64> = records.iter().filter_map(|r| r.se).collect();
    let mean_se = (!ses.is_empty()).then(|| ses.iter().sum::<f64>() / ses.len() as f64);
    let cis: Vec<(f64, f64)> = records.iter().filter_map(|r| r.ci).collect();
    let coverage = (!cis.is_empty()).then(|| {
        cis.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count() as f64
            / cis.len() as f64
    });
    let mean_ess = records.first().and_then(|r| r.ess.as_ref()).map(|first| {
        (0..first.len())
            .map(|a| {
                records
                    .iter()
                    .filter_map(|r| r.ess.as_ref().map(|e| e[a]))
                    .sum::<f64>()
                    / mf
            })
            .collect()
    });
    let variance_method = match analysis.variance {
        VarianceChoice::None => VarianceMethod::None,
        VarianceChoice::Sandwich => VarianceMethod::Sandwich,
        VarianceChoice::Bootstrap { .. } => VarianceMethod::Bootstrap,
    };
    let estimand = match (analysis.method, target) {
        (Method::PsAdjustedRegression, _) => "ATO".to_string(),
        _ => analysis.scheme.estimand_label().to_string(),
    };
    Ok(AnalysisSummary {
        label,
        scheme: analysis.scheme,
        method: analysis.method,
        variance_method,
        estimand,
        truth,
        successes: m,
        failures,
        mean_point,
        bias,
        empirical_sd: variance.sqrt(),
        variance,
        rmse,
        mcse_bias: (variance / mf).sqrt(),
        mean_se,
        coverage,
        mean_ess,
        records,
    })
}

/// Monte Carlo study: `replicates` independent draws from `config`, each
/// analysed by every entry of `analyses` and judged against that entry's
/// own estimand.
///
/// Replicate `r` uses seed `derive_seed(seed, r)`; replicates run in
/// parallel and are reduced in index order, so the result is bit-identical
/// for any thread count.
pub fn run_monte_carlo(
    config: &DgpConfig,
    analyses: &[Analysis],
    options: &HarnessOptions,
    replicates: usize,
    seed: u64,
) -> Result<SimulationResult> {
    config.validate()?;
    if replicates < 100 {
        return Err(Error::Config(format!(
            "need at least 100 replicates, got {replicates}"
        )));
    }
    if analyses.is_empty() {
        return Err(Error::Config("no analyses requested".into()));
    }
    for a in analyses {
        a.validate()?;
    }
    let truths = true_estimands(config)?;
    let fit_options = options.propensity_model.fit_options();
    let per_replicate: Vec<Vec<Option<ReplicateRecord>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            run_replicate(
                config,
                analyses,
                options,
                &fit_options,
                r,
                derive_seed(seed, r as u64),
            )
        })
        .collect();
    let mut columns: Vec<Vec<ReplicateRecord>> = vec![Vec::with_capacity(replicates); analyses.len()];
    for row in per_replicate {
        for (k, rec) in row.into_iter().enumerate() {
            if let Some(rec) = rec {
                columns[k].push(rec);
            }
        }
    }
    let summaries = analyses
        .iter()
        .zip(columns)
        .map(|(a, recs)| summarize(a, &truths, recs, replicates))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationResult {
        config: config.clone(),
        propensity_model: options.propensity_model,
        ci_level: options.ci_level,
        replicates,
        seed,
        truths,
        analyses: summaries,
    })
}
