//! Point estimators of weighted average treatment effects.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::linalg;
use crate::propensity::{self, FitOptions, PropensityFit};
use crate::weights::{binary_weight, WeightScheme, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hajek,
    Augmented,
    PsAdjustedRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    Sandwich,
    Bootstrap,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub estimand_label: String,
    /// `(j, k)`: the estimate is `mu_j - mu_k`.
    pub contrast: (usize, usize),
    pub point: f64,
    pub se: Option<f64>,
    pub ci: Option<ConfidenceInterval>,
    pub method: Method,
    pub variance_method: VarianceMethod,
    /// Weighted arm means `(mu_j, mu_k)` for weighting estimators.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm_means: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EffectEstimate {
    fn new(label: String, contrast: (usize, usize), point: f64, method: Method) -> Self {
        Self {
            estimand_label: label,
            contrast,
            point,
            se: None,
            ci: None,
            method,
            variance_method: VarianceMethod::None,
            arm_means: None,
            notes: Vec::new(),
        }
    }
}

fn estimand_label(scheme: WeightScheme, contrast: (usize, usize)) -> String {
    match scheme {
        WeightScheme::GeneralizedOverlap => {
            format!("pairwise-generalized-ATO({},{})", contrast.0, contrast.1)
        }
        other => other.estimand_label().to_string(),
    }
}

fn check_contrast(arms: usize, contrast: (usize, usize)) -> Result<()> {
    let (j, k) = contrast;
    if j >= arms || k >= arms || j == k {
        return Err(Error::Domain(format!(
            "invalid contrast ({j}, {k}) for {arms} arms"
        )));
    }
    Ok(())
}

/// Self-normalized weighted mean of the outcome in `arm` over kept units.
pub fn weighted_arm_mean(data: &Dataset, w: &WeightVector, arm: usize) -> Result<f64> {
    // Centered at the arm's first outcome: a constant outcome gives its value exactly.
    let mut reference = None;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &z) in data.treatment().iter().enumerate() {
        if z == arm && w.kept[i] {
            let y = data.outcome()[i];
            let r = *reference.get_or_insert(y);
            num += w.weights[i] * (y - r);
            den += w.weights[i];
        }
    }
    match reference {
        Some(r) if den > 0.0 => Ok(r + num / den),
        _ => Err(Error::Domain(format!("arm {arm} has zero total weight"))),
    }
}

/// True when every unit has the same score vector (a randomized design):
/// all tilted estimands then coincide.
pub fn has_constant_scores(fit: &PropensityFit) -> bool {
    let n = fit.n() as f64;
    (0..fit.arms()).all(|k| {
        let col = fit.scores.column(k);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() <= 1e-12
    })
}

pub const CONSTANT_SCORE_NOTE: &str = "constant propensity score: ATO equals ATE";

/// Hájek contrast `mu_j - mu_k` of weighted arm means.
pub fn hajek_estimate(
    data: &Dataset,
    w: &WeightVector,
    contrast: (usize, usize),
) -> Result<EffectEstimate> {
    check_contrast(data.arms(), contrast)?;
    if w.len() != data.n() {
        return Err(Error::Domain("weight vector length does not match data".into()));
    }
    let mu_j = weighted_arm_mean(data, w, contrast.0)?;
    let mu_k = weighted_arm_mean(data, w, contrast.1)?;
    let mut est = EffectEstimate::new(
        estimand_label(w.scheme, contrast),
        contrast,
        mu_j - mu_k,
        Method::Hajek,
    );
    est.arm_means = Some((mu_j, mu_k));
    Ok(est)
}

/// Per-arm outcome regressions evaluated at every unit.
#[derive(Debug, Clone)]
pub struct OutcomeModelFit {
    pub family: OutcomeFamily,
    /// One `(p+1)`-vector per arm over `(1, X)`.
    pub coefficients: Vec<Vec<f64>>,
    /// `n x K`; entry `(i, k)` is the predicted outcome of unit `i` under arm `k`.
    pub fitted: DMatrix<f64>,
}

impl OutcomeModelFit {
    pub fn predict(&self, unit: usize, arm: usize) -> f64 {
        self.fitted[(unit, arm)]
    }
}

/// Least squares (continuous) or logistic regression (binary) of the outcome
/// on `(1, X)` separately within each arm.
pub fn fit_outcome_regression(data: &Dataset, family: OutcomeFamily) -> Result<OutcomeModelFit> {
    if family == OutcomeFamily::Binary && data.outcome().iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Domain("logistic outcome model needs a 0/1 outcome".into()));
    }
    let all: Vec<usize> = (0..data.p()).collect();
    let full = propensity::model_matrix(data.covariates(), &all);
    let arms = data.arms();
    let mut coefficients = Vec::with_capacity(arms);
    for arm in 0..arms {
        let rows: Vec<usize> = (0..data.n())
            .filter(|&i| data.treatment()[i] == arm)
            .collect();
        let y: Vec<f64> = rows.iter().map(|&i| data.outcome()[i]).collect();
        let beta = match family {
            OutcomeFamily::Continuous => {
                let x = full.select_rows(rows.iter());
                linalg::least_squares(&x, &y)?
            }
            OutcomeFamily::Binary => binary_outcome_coefficients(data, &rows, &y)?,
        };
        coefficients.push(beta);
    }
    let mut fitted = DMatrix::zeros(data.n(), arms);
    for (arm, beta) in coefficients.iter().enumerate() {
        for i in 0..data.n() {
            let eta: f64 = full.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            fitted[(i, arm)] = match family {
                OutcomeFamily::Continuous => eta,
                OutcomeFamily::Binary => propensity::logistic(eta),
            };
        }
    }
    if fitted.iter().any(|v| !v.is_finite()) {
        return Err(Error::Internal("non-finite outcome model prediction".into()));
    }
    Ok(OutcomeModelFit {
        family,
        coefficients,
        fitted,
    })
}

fn binary_outcome_coefficients(data: &Dataset, rows: &[usize], y: &[f64]) -> Result<Vec<f64>> {
    let labels: Vec<usize> = y.iter().map(|&v| v as usize).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::Separation {
            max_eta: f64::INFINITY,
            gradient_norm: 0.0,
        });
    }
    let x = data.covariates().select_rows(rows.iter());
    let fit = propensity::fit_logit(&x, &labels, 2, &FitOptions::default())?;
    Ok(fit.coefficients.into_iter().next().expect("one block"))
}

/// Augmented (doubly robust) balancing-weight estimator of the tilted
/// effect, contrast `(1, 0)`:
///
/// `sum_i h_i [m1 - m0 + Z (Y - m1) / e - (1 - Z)(Y - m0) / (1 - e)] / sum_i h_i`.
pub fn augmented_estimate(
    data: &Dataset,
    fit: &PropensityFit,
    scheme: WeightScheme,
    om: &OutcomeModelFit,
) -> Result<EffectEstimate> {
    if data.arms() != 2 {
        return Err(Error::Domain("augmented estimator needs a binary treatment".into()));
    }
    let tilting = scheme.tilting().ok_or_else(|| {
        Error::Domain(format!("scheme `{scheme}` has no tilting function"))
    })?;
    if fit.n() != data.n() || om.fitted.nrows() != data.n() {
        return Err(Error::Domain("model and data dimensions differ".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..data.n() {
        let e = fit.score(i, 1);
        let e0 = fit.score(i, 0);
        let h = tilting.eval(e, e0);
        let m1 = om.predict(i, 1);
        let m0 = om.predict(i, 0);
        let y = data.outcome()[i];
        // h/e and h/(1-e) are the balancing weights themselves.
        let resid = if data.treatment()[i] == 1 {
            binary_weight(tilting, true, e, e0) * (y - m1)
        } else {
            -binary_weight(tilting, false, e, e0) * (y - m0)
        };
        num += h * (m1 - m0) + resid;
        den += h;
    }
    if !(den > 0.0) {
        return Err(Error::Domain("tilting weights sum to zero".into()));
    }
    Ok(EffectEstimate::new(
        scheme.estimand_label().to_string(),
        (1, 0),
        num / den,
        Method::Augmented,
    ))
}

/// Coefficient on `Z` in the least-squares regression of `Y` on
/// `(1, Z, e(X))`.
pub fn ps_adjusted_regression(data: &Dataset, fit: &PropensityFit) -> Result<EffectEstimate> {
    if data.arms() != 2 {
        return Err(Error::Domain(
            "propensity-adjusted regression needs a binary treatment".into(),
        ));
    }
    let n = data.n();
    let e = fit.treated_scores();
    let constant = has_constant_scores(fit);
    let cols = if constant { 2 } else { 3 };
    let x = DMatrix::from_fn(n, cols, |i, j| match j {
        0 => 1.0,
        1 => data.treatment()[i] as f64,
        _ => e[i],
    });
    let beta = linalg::least_squares(&x, data.outcome())?;
    let mut est = EffectEstimate::new("ATO".into(), (1, 0), beta[1], Method::PsAdjustedRegression);
    if constant {
        est.notes
            .push(format!("{CONSTANT_SCORE_NOTE}; score column dropped"));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propensity::ModelKind;
    use crate::weights::compute_weights;

    fn constant_fit(n: usize, e: f64) -> PropensityFit {
        PropensityFit {
            kind: ModelKind::BinaryLogistic,
            coefficients: vec![vec![0.0]],
            scores: DMatrix::from_fn(n, 2, |_, k| if k == 1 { e } else { 1.0 - e }),
            converged: true,
            iterations: 0,
            final_gradient_norm: 0.0,
            log_likelihood: 0.0,
            ridge: 0.0,
            columns: vec![],
            gradient_tol: 1e-9,
        }
    }

    fn toy(y: Vec<f64>, z: Vec<usize>, x: Vec<f64>) -> Dataset {
        let n = z.len();
        Dataset::from_parts(
            DMatrix::from_column_slice(n, 1, &x),
            vec!["x".into()],
            z,
            2,
            y,
            OutcomeFamily::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn outcome_equal_to_treatment() {
        let z = vec![1, 0, 1, 0, 1, 0];
        let y: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let data = toy(y, z, vec![0.1, 0.4, -0.3, 0.9, 1.2, -1.0]);
        let fit = constant_fit(6, 0.3);
        for scheme in [WeightScheme::Iptw, WeightScheme::Overlap, WeightScheme::Entropy] {
            let w = compute_weights(&fit, data.design(), scheme).unwrap();
            assert_eq!(hajek_estimate(&data, &w, (1, 0)).unwrap().point, 1.0);
        }
    }

    #[test]
    fn contrast_is_antisymmetric() {
        let data = toy(
            vec![1.0, 2.5, -0.5, 3.0, 0.2, 1.1],
            vec![1, 0, 1, 0, 1, 0],
            vec![0.1, 0.4, -0.3, 0.9, 1.2, -1.0],
        );
        let fit = constant_fit(6, 0.4);
        let w = compute_weights(&fit, data.design(), WeightScheme::Overlap).unwrap();
        let a = hajek_estimate(&data, &w, (1, 0)).unwrap().point;
        let b = hajek_estimate(&data, &w, (0, 1)).unwrap().point;
        assert_eq!(a, -b);
        assert!(hajek_estimate(&data, &w, (1, 1)).is_err());
        assert!(hajek_estimate(&data, &w, (2, 0)).is_err());
    }

    #[test]
    fn constant_outcome_model() {
        let data = toy(
            vec![3.0; 6],
            vec![1, 0, 1, 0, 1, 0],
            vec![0.1, 0.4, -0.3, 0.9, 1.2, -1.0],
        );
        let om = fit_outcome_regression(&data, OutcomeFamily::Continuous).unwrap();
        assert!(om.fitted.iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn exact_linear_outcome_has_zero_residuals() {
        let x = vec![0.1, 0.4, -0.3, 0.9, 1.2, -1.0, 0.5, 2.0];
        let z = vec![1, 0, 1, 0, 1, 0, 1, 0];
        let y: Vec<f64> = x
            .iter()
            .zip(&z)
            .map(|(&x, &z)| if z == 1 { 1.0 + 2.0 * x } else { -0.5 + 0.7 * x })
            .collect();
        let data = toy(y.clone(), z.clone(), x);
        let om = fit_outcome_regression(&data, OutcomeFamily::Continuous).unwrap();
        for i in 0..8 {
            assert!((om.predict(i, z[i]) - y[i]).abs() < 1e-12);
        }
        assert!((om.coefficients[1][1] - 2.0).abs() < 1e-12);
        assert!((om.coefficients[0][0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_arm_design() {
        // Arm 1 has a single distinct covariate value.
        let data = toy(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![1, 0, 1, 0, 1, 0],
            vec![1.0, 0.4, 1.0, 0.9, 1.0, -1.0],
        );
        assert!(matches!(
            fit_outcome_regression(&data, OutcomeFamily::Continuous),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn augmented_with_zero_outcome_model_is_weighted_ipw() {
        let e = [0.3, 0.6, 0.45, 0.7, 0.2, 0.55];
        let z = vec![1, 0, 1, 0, 1, 0];
        let y = vec![1.0, 2.5, -0.5, 3.0, 0.2, 1.1];
        let data = toy(y.clone(), z.clone(), vec![0.1, 0.4, -0.3, 0.9, 1.2, -1.0]);
        let mut fit = constant_fit(6, 0.5);
        for (i, &ei) in e.iter().enumerate() {
            fit.scores[(i, 1)] = ei;
            fit.scores[(i, 0)] = 1.0 - ei;
        }
        let om = OutcomeModelFit {
            family: OutcomeFamily::Continuous,
            coefficients: vec![vec![0.0, 0.0]; 2],
            fitted: DMatrix::zeros(6, 2),
        };
        let aug = augmented_estimate(&data, &fit, WeightScheme::Overlap, &om).unwrap();
        // Horvitz-Thompson form normalized by the total tilting mass.
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..6 {
            let h = e[i] * (1.0 - e[i]);
            den += h;
            num += if z[i] == 1 {
                h * y[i] / e[i]
            } else {
                -h * y[i] / (1.0 - e[i])
            };
        }
        assert!((aug.point - num / den).abs() < 1e-12);
    }

    #[test]
    fn ps_regression_constant_scores_is_difference_in_means() {
        let y = vec![1.0, 2.5, -0.5, 3.0, 0.2, 1.1];
        let z = vec![1, 0, 1, 0, 1, 0];
        let data = toy(y, z, vec![0.1, 0.4, -0.3, 0.9, 1.2, -1.0]);
        let est = ps_adjusted_regression(&data, &constant_fit(6, 0.5)).unwrap();
        let diff = (1.0 - 0.5 + 0.2) / 3.0 - (2.5 + 3.0 + 1.1) / 3.0;
        assert!((est.point - diff).abs() < 1e-12);
        assert_eq!(est.notes.len(), 1);
    }

    #[test]
    fn ps_regression_exact_model() {
        let e = [0.3, 0.6, 0.45, 0.7, 0.2, 0.55, 0.8];
        let z = vec![1, 0, 1, 0, 1, 0, 0];
        let y: Vec<f64> = (0..7).map(|i| 2.0 * z[i] as f64 + e[i]).collect();
        let data = toy(y, z, vec![0.1, 0.4, -0.3, 0.9, 1.2, -1.0, 0.0]);
        let mut fit = constant_fit(7, 0.5);
        for (i, &ei) in e.iter().enumerate() {
            fit.scores[(i, 1)] = ei;
            fit.scores[(i, 0)] = 1.0 - ei;
        }
        let est = ps_adjusted_regression(&data, &fit).unwrap();
        assert!((est.point - 2.0).abs() < 1e-12);
        assert!(est.notes.is_empty());
    }
}
