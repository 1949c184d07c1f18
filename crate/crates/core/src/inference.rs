//! Standard errors and Wald intervals.
//!
//! The sandwich estimator stacks the logistic score equations with the two
//! weighted-mean equations, so the propensity coefficients count as
//! estimated. The bootstrap re-runs a whole [`Recipe`] on unit-level
//! resamples.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, Design, OutcomeFamily};
use crate::error::{Error, Result};
use crate::estimators::{
    self, ConfidenceInterval, EffectEstimate, Method, VarianceMethod,
};
use crate::linalg;
use crate::propensity::{self, FitOptions, PropensityFit};
use crate::rng;
use crate::weights::{self, binary_weight, binary_weight_derivative, Tilting, WeightScheme};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceResult {
    pub se: f64,
    pub method: VarianceMethod,
    /// Successful bootstrap replicates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_replicates: Option<usize>,
    /// Condition number of the bread matrix (sandwich only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_number: Option<f64>,
}

/// Binary tilting used by the sandwich, if the scheme has one.
fn sandwich_tilting(scheme: WeightScheme) -> Result<Tilting> {
    match scheme {
        WeightScheme::Iptw
        | WeightScheme::Stabilized
        | WeightScheme::Treated
        | WeightScheme::Overlap
        | WeightScheme::Matching
        | WeightScheme::Entropy => Ok(scheme.tilting().expect("binary scheme")),
        other => Err(Error::Inference(format!(
            "no sandwich variance for scheme `{other}`; use the bootstrap"
        ))),
    }
}

/// Balancing weights evaluated at arbitrary propensity coefficients `beta`
/// over the fit's model matrix.
///
/// Stabilized weights are returned in their plain IPTW form; the per-arm
/// constant does not change any Hájek quantity.
pub fn weights_at_coefficients(
    model_matrix: &DMatrix<f64>,
    treatment: &[usize],
    beta: &[f64],
    scheme: WeightScheme,
) -> Result<Vec<f64>> {
    let tilting = sandwich_tilting(scheme)?;
    let e = propensity::binary_scores(model_matrix, beta);
    Ok(treatment
        .iter()
        .zip(&e)
        .map(|(&z, &e)| binary_weight(tilting, z == 1, e, 1.0 - e))
        .collect())
}

/// Analytic Jacobian `dw_i / d beta` (`n x (q+1)`) of the balancing weights
/// with respect to the propensity coefficients.
pub fn weight_jacobian(
    fit: &PropensityFit,
    design: &Design,
    scheme: WeightScheme,
) -> Result<DMatrix<f64>> {
    let tilting = sandwich_tilting(scheme)?;
    let x = fit.model_matrix(design);
    let mut jac = DMatrix::zeros(x.nrows(), x.ncols());
    for (i, &z) in design.treatment().iter().enumerate() {
        let e = fit.score(i, 1);
        let e0 = fit.score(i, 0);
        // de/d beta = e (1 - e) x
        let scale = binary_weight_derivative(tilting, z == 1, e, e0) * e * e0;
        for j in 0..x.ncols() {
            jac[(i, j)] = scale * x[(i, j)];
        }
    }
    Ok(jac)
}

/// Stacked M-estimation sandwich `A^-1 B A^-T / n` for a binary Hájek
/// contrast, with the weight derivatives in the propensity coefficients
/// entering the bread.
pub fn sandwich_variance(
    data: &Dataset,
    fit: &PropensityFit,
    scheme: WeightScheme,
    estimate: &EffectEstimate,
) -> Result<VarianceResult> {
    if data.arms() != 2 {
        return Err(Error::Inference(
            "sandwich variance needs a binary treatment; use the bootstrap".into(),
        ));
    }
    if estimate.method != Method::Hajek {
        return Err(Error::Inference(format!(
            "sandwich variance covers Hájek estimates, not {:?}",
            estimate.method
        )));
    }
    if fit.ridge != 0.0 {
        return Err(Error::Inference(
            "sandwich variance assumes an unpenalized propensity fit".into(),
        ));
    }
    let tilting = sandwich_tilting(scheme)?;
    let design = data.design();
    let n = data.n();
    let x = fit.model_matrix(design);
    let d = x.ncols();
    let dim = d + 2;
    let w: Vec<f64> = (0..n)
        .map(|i| binary_weight(tilting, design.treatment()[i] == 1, fit.score(i, 1), fit.score(i, 0)))
        .collect();
    let jac = weight_jacobian(fit, design, scheme)?;
    let (mu1, mu0) = {
        let wv = weights::compute_weights(fit, design, scheme)?;
        (
            estimators::weighted_arm_mean(data, &wv, 1)?,
            estimators::weighted_arm_mean(data, &wv, 0)?,
        )
    };

    let mut bread = DMatrix::<f64>::zeros(dim, dim);
    let mut meat = DMatrix::<f64>::zeros(dim, dim);
    let mut psi = DVector::<f64>::zeros(dim);
    for i in 0..n {
        let z = design.treatment()[i];
        let y = data.outcome()[i];
        let e = fit.score(i, 1);
        let e0 = fit.score(i, 0);
        let resid_ps = f64::from(u8::from(z == 1)) - e;
        let info = e * e0;
        for r in 0..d {
            psi[r] = resid_ps * x[(i, r)];
            for s in 0..d {
                bread[(r, s)] += info * x[(i, r)] * x[(i, s)];
            }
        }
        let (row, mu) = if z == 1 { (d, mu1) } else { (d + 1, mu0) };
        psi[d] = 0.0;
        psi[d + 1] = 0.0;
        psi[row] = w[i] * (y - mu);
        // -d psi_mu / d beta and -d psi_mu / d mu
        for s in 0..d {
            bread[(row, s)] -= (y - mu) * jac[(i, s)];
        }
        bread[(row, row)] += w[i];
        meat += &psi * psi.transpose();
    }
    bread /= n as f64;
    meat /= n as f64;

    let condition = linalg::condition_number(&bread);
    if !(condition < 1e14) {
        return Err(Error::SingularBread { condition });
    }
    let inv = bread
        .clone()
        .try_inverse()
        .ok_or(Error::SingularBread { condition })?;
    let cov = &inv * meat * inv.transpose() / n as f64;
    let var = cov[(d, d)] + cov[(d + 1, d + 1)] - 2.0 * cov[(d, d + 1)];
    Ok(VarianceResult {
        se: var.max(0.0).sqrt(),
        method: VarianceMethod::Sandwich,
        replicates: None,
        failed_replicates: None,
        condition_number: Some(condition),
    })
}

/// An end-to-end estimation pipeline, re-run on every bootstrap resample.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub scheme: WeightScheme,
    pub method: Method,
    pub contrast: (usize, usize),
    pub fit_options: FitOptions,
    /// Outcome model family for the augmented estimator.
    pub outcome_family: OutcomeFamily,
}

impl Recipe {
    pub fn hajek(scheme: WeightScheme) -> Self {
        Self {
            scheme,
            method: Method::Hajek,
            contrast: (1, 0),
            fit_options: FitOptions::default(),
            outcome_family: OutcomeFamily::Continuous,
        }
    }

    /// Fits the propensity model and returns the point estimate with the fit.
    pub fn run_with_fit(&self, data: &Dataset) -> Result<(EffectEstimate, PropensityFit)> {
        self.scheme.check_arms(data.arms())?;
        let fit = propensity::fit(data.design(), &self.fit_options)?;
        let est = match self.method {
            Method::Hajek => {
                let w = weights::compute_weights(&fit, data.design(), self.scheme)?;
                estimators::hajek_estimate(data, &w, self.contrast)?
            }
            Method::Augmented => {
                if self.contrast != (1, 0) {
                    return Err(Error::Domain("augmented estimator supports contrast (1, 0) only".into()));
                }
                let om = estimators::fit_outcome_regression(data, self.outcome_family)?;
                estimators::augmented_estimate(data, &fit, self.scheme, &om)?
            }
            Method::PsAdjustedRegression => {
                let est = estimators::ps_adjusted_regression(data, &fit)?;
                match self.contrast {
                    (1, 0) => est,
                    (0, 1) => EffectEstimate {
                        point: -est.point,
                        contrast: (0, 1),
                        ..est
                    },
                    other => {
                        return Err(Error::Domain(format!("invalid contrast {other:?}")))
                    }
                }
            }
        };
        let mut est = est;
        if self.method == Method::Hajek && estimators::has_constant_scores(&fit) {
            est.notes.push(estimators::CONSTANT_SCORE_NOTE.into());
        }
        Ok((est, fit))
    }

    pub fn run(&self, data: &Dataset) -> Result<EffectEstimate> {
        self.run_with_fit(data).map(|(e, _)| e)
    }
}

/// Largest tolerated share of failed bootstrap replicates.
pub const MAX_BOOTSTRAP_FAILURE: f64 = 0.05;

/// Nonparametric bootstrap standard error: the standard deviation of the
/// recipe's point estimate over `reps` unit-level resamples. Replicate `r`
/// draws from its own stream derived from `(seed, r)`, and results are reduced in
/// replicate order, so the value does not depend on thread scheduling.
pub fn bootstrap_variance(
    data: &Dataset,
    recipe: &Recipe,
    reps: usize,
    seed: u64,
) -> Result<VarianceResult> {
    use rand::Rng;
    if reps < 100 {
        return Err(Error::Inference(format!(
            "bootstrap needs at least 100 replicates, got {reps}"
        )));
    }
    let n = data.n();
    let points: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng::stream(seed, r as u64);
            let rows: Vec<usize> = (0..n).map(|_| stream.random_range(0..n)).collect();
            let sample = data.select(&rows).ok()?;
            recipe.run(&sample).ok().map(|e| e.point)
        })
        .collect();
    let ok: Vec<f64> = points.iter().flatten().copied().collect();
    let failed = reps - ok.len();
    if failed as f64 > MAX_BOOTSTRAP_FAILURE * reps as f64 {
        return Err(Error::Inference(format!(
            "{failed} of {reps} bootstrap replicates failed"
        )));
    }
    if ok.len() < 2 {
        return Err(Error::Inference("too few successful bootstrap replicates".into()));
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    let var = ok.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64;
    Ok(VarianceResult {
        se: var.sqrt(),
        method: VarianceMethod::Bootstrap,
        replicates: Some(ok.len()),
        failed_replicates: Some(failed),
        condition_number: None,
    })
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Wald interval `point +/- z_{(1+level)/2} se`.
pub fn confidence_interval(point: f64, se: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    if !(se >= 0.0) {
        return Err(Error::Domain(format!("standard error {se} is negative")));
    }
    if se == 0.0 {
        return Ok((point, point));
    }
    let z = normal_quantile(0.5 + level / 2.0);
    Ok((point - z * se, point + z * se))
}

/// Copies `variance` onto `estimate` and attaches a Wald interval.
pub fn attach(estimate: &mut EffectEstimate, variance: &VarianceResult, level: f64) -> Result<()> {
    let (lower, upper) = confidence_interval(estimate.point, variance.se, level)?;
    estimate.se = Some(variance.se);
    estimate.variance_method = variance.method;
    estimate.ci = Some(ConfidenceInterval {
        level,
        lower,
        upper,
    });
    Ok(())
}
