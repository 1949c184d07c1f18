//! Covariate balance diagnostics.
//!
//! Everything here takes a [`Design`], so outcomes cannot leak into the
//! design stage.

use std::io::Write;

use serde::Serialize;

use crate::data::{format_real, Design};
use crate::error::{Error, Result};
use crate::propensity::PropensityFit;
use crate::weights::{compute_weights, WeightScheme, WeightVector};

/// Default exact-balance tolerance on the standardized scale.
pub const EXACT_BALANCE_TOL: f64 = 1e-6;

fn arm_units(design: &Design, arm: usize, w: Option<&WeightVector>) -> Vec<usize> {
    design
        .treatment()
        .iter()
        .enumerate()
        .filter(|&(i, &z)| z == arm && w.is_none_or(|w| w.kept[i]))
        .map(|(i, _)| i)
        .collect()
}

/// Hájek-normalized mean of covariate `col` over `units`.
fn weighted_mean(design: &Design, col: usize, units: &[usize], w: Option<&WeightVector>) -> f64 {
    let x = design.covariates();
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in units {
        let wi = w.map_or(1.0, |w| w.weights[i]);
        num += wi * x[(i, col)];
        den += wi;
    }
    num / den
}

/// Unweighted sample variance (divisor `m - 1`) of covariate `col` in `arm`.
fn arm_variance(design: &Design, col: usize, arm: usize) -> f64 {
    let units = arm_units(design, arm, None);
    let m = units.len();
    if m < 2 {
        return 0.0;
    }
    let x = design.covariates();
    let mean = units.iter().map(|&i| x[(i, col)]).sum::<f64>() / m as f64;
    units.iter().map(|&i| (x[(i, col)] - mean).powi(2)).sum::<f64>() / (m - 1) as f64
}

fn pooled_sd(design: &Design, col: usize, contrast: (usize, usize)) -> f64 {
    ((arm_variance(design, col, contrast.0) + arm_variance(design, col, contrast.1)) / 2.0).sqrt()
}

/// Standardized mean difference per covariate, arm `j` minus arm `k`:
/// (weighted) mean difference over the pooled unweighted SD.
///
/// A covariate with zero pooled SD gets 0 when the means agree and a signed
/// infinity otherwise.
pub fn smd(
    design: &Design,
    contrast: (usize, usize),
    w: Option<&WeightVector>,
) -> Result<Vec<f64>> {
    let (j, k) = contrast;
    if j >= design.arms() || k >= design.arms() || j == k {
        return Err(Error::Domain(format!("invalid contrast ({j}, {k})")));
    }
    if let Some(w) = w {
        if w.len() != design.n() {
            return Err(Error::Domain("weight vector length does not match data".into()));
        }
    }
    let uj = arm_units(design, j, w);
    let uk = arm_units(design, k, w);
    if uj.is_empty() || uk.is_empty() {
        return Err(Error::Domain("contrast arm has no (kept) units".into()));
    }
    Ok((0..design.p())
        .map(|c| {
            let diff = weighted_mean(design, c, &uj, w) - weighted_mean(design, c, &uk, w);
            let sd = pooled_sd(design, c, contrast);
            if sd > 0.0 {
                diff / sd
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactBalance {
    /// Max over modeled covariates of |weighted treated mean - weighted control mean|.
    pub max_abs_difference: f64,
    /// Same, divided by the pooled unweighted SD.
    pub max_standardized_difference: f64,
}

/// Checks that overlap weights from a converged logistic fit balance every
/// modeled covariate exactly: the logistic score equations give
/// `sum_treated (1-e) x = sum_control e x`.
pub fn assert_exact_balance(
    design: &Design,
    fit: &PropensityFit,
    tolerance: f64,
) -> Result<ExactBalance> {
    if design.arms() != 2 {
        return Err(Error::Domain("exact balance check needs a binary treatment".into()));
    }
    if !fit.converged {
        return Err(Error::Domain("exact balance check needs a converged fit".into()));
    }
    let w = compute_weights(fit, design, WeightScheme::Overlap)?;
    let treated = arm_units(design, 1, Some(&w));
    let control = arm_units(design, 0, Some(&w));
    let mut out = ExactBalance {
        max_abs_difference: 0.0,
        max_standardized_difference: 0.0,
    };
    for &c in &fit.columns {
        let diff = (weighted_mean(design, c, &treated, Some(&w))
            - weighted_mean(design, c, &control, Some(&w)))
        .abs();
        let sd = pooled_sd(design, c, (1, 0));
        out.max_abs_difference = out.max_abs_difference.max(diff);
        if sd > 0.0 {
            out.max_standardized_difference = out.max_standardized_difference.max(diff / sd);
        }
    }
    if out.max_standardized_difference > tolerance {
        return Err(Error::BalanceViolation(out.max_standardized_difference));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub covariate: String,
    /// Weighted mean per arm.
    pub means: Vec<f64>,
    /// Unweighted SD per arm.
    pub sds: Vec<f64>,
}

/// Weighted descriptive table of the target population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineTable {
    pub arm_labels: Vec<String>,
    pub rows: Vec<BaselineRow>,
    pub ess_per_arm: Vec<f64>,
    pub n_per_arm: Vec<usize>,
}

impl BaselineTable {
    /// CSV with columns `covariate, mean_<arm>, sd_<arm>, ...` and trailing
    /// `n` and `ess` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["covariate".to_string()];
        for label in &self.arm_labels {
            header.push(format!("mean_{label}"));
            header.push(format!("sd_{label}"));
        }
        out.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.covariate.clone()];
            for (m, s) in row.means.iter().zip(&row.sds) {
                rec.push(format_real(*m));
                rec.push(format_real(*s));
            }
            out.write_record(&rec)?;
        }
        let mut n_row = vec!["n".to_string()];
        let mut ess_row = vec!["ess".to_string()];
        for a in 0..self.arm_labels.len() {
            n_row.push(self.n_per_arm[a].to_string());
            n_row.push(String::new());
            ess_row.push(format_real(self.ess_per_arm[a]));
            ess_row.push(String::new());
        }
        out.write_record(&n_row)?;
        out.write_record(&ess_row)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Per-arm weighted means and unweighted SDs of every covariate, with ESS.
/// Without weights this is the raw descriptive table.
pub fn baseline_table(design: &Design, w: Option<&WeightVector>) -> Result<BaselineTable> {
    let arms = design.arms();
    let units: Vec<Vec<usize>> = (0..arms).map(|a| arm_units(design, a, w)).collect();
    if let Some(a) = units.iter().position(Vec::is_empty) {
        return Err(Error::Domain(format!("arm {a} has no kept units")));
    }
    let rows = (0..design.p())
        .map(|c| BaselineRow {
            covariate: design.covariate_names()[c].clone(),
            means: (0..arms).map(|a| weighted_mean(design, c, &units[a], w)).collect(),
            sds: (0..arms).map(|a| arm_variance(design, c, a).sqrt()).collect(),
        })
        .collect();
    let ess_per_arm = match w {
        Some(w) => w.ess_per_arm.clone(),
        None => units.iter().map(|u| u.len() as f64).collect(),
    };
    Ok(BaselineTable {
        arm_labels: design.arm_labels().to_vec(),
        rows,
        ess_per_arm,
        n_per_arm: design.arm_counts(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateBalance {
    pub covariate: String,
    pub unweighted_smd: f64,
    pub weighted_smd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub scheme: WeightScheme,
    pub contrast: (usize, usize),
    pub covariates: Vec<CovariateBalance>,
    pub max_abs_weighted_smd: f64,
    pub max_abs_unweighted_smd: f64,
    pub baseline: BaselineTable,
    pub ess_per_arm: Vec<f64>,
}

impl BalanceReport {
    /// CSV `covariate, unweighted_smd, weighted_smd`.
    pub fn write_smd_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["covariate", "unweighted_smd", "weighted_smd"])?;
        for c in &self.covariates {
            out.write_record([
                c.covariate.clone(),
                format_real(c.unweighted_smd),
                format_real(c.weighted_smd),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn balance_report(
    design: &Design,
    w: &WeightVector,
    contrast: (usize, usize),
) -> Result<BalanceReport> {
    let raw = smd(design, contrast, None)?;
    let weighted = smd(design, contrast, Some(w))?;
    let covariates: Vec<CovariateBalance> = design
        .covariate_names()
        .iter()
        .zip(raw.iter().zip(&weighted))
        .map(|(name, (&u, &wt))| CovariateBalance {
            covariate: name.clone(),
            unweighted_smd: u,
            weighted_smd: wt,
        })
        .collect();
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(BalanceReport {
        scheme: w.scheme,
        contrast,
        max_abs_weighted_smd: max_abs(&weighted),
        max_abs_unweighted_smd: max_abs(&raw),
        covariates,
        baseline: baseline_table(design, Some(w))?,
        ess_per_arm: w.ess_per_arm.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    /// Units of each arm whose score falls in the bin.
    pub counts: Vec<usize>,
}

/// Per-arm counts of `P(Z = score_arm | X)` in equal-width bins on `[0, 1]`,
/// for overlap plots.
pub fn ps_histogram(
    design: &Design,
    fit: &PropensityFit,
    score_arm: usize,
    bins: usize,
) -> Result<Vec<HistogramBin>> {
    if bins == 0 || score_arm >= fit.arms() || fit.n() != design.n() {
        return Err(Error::Domain("invalid histogram request".into()));
    }
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            counts: vec![0; design.arms()],
        })
        .collect();
    for (i, &z) in design.treatment().iter().enumerate() {
        let e = fit.score(i, score_arm);
        let b = ((e * bins as f64).floor() as usize).min(bins - 1);
        out[b].counts[z] += 1;
    }
    Ok(out)
}

pub fn write_histogram_csv<W: Write>(
    bins: &[HistogramBin],
    arm_labels: &[String],
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["bin_lower", "bin_upper", "arm", "count"])?;
    for bin in bins {
        for (a, count) in bin.counts.iter().enumerate() {
            out.write_record([
                format_real(bin.lower),
                format_real(bin.upper),
                arm_labels[a].clone(),
                count.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
