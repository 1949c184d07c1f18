//! Logistic and multinomial-logistic propensity models fitted by damped
//! Newton iterations.
//!
//! Both models go through the same baseline-category logit solver; the binary
//! model is the `K = 2` case with arm 1 as the modelled category. Covariates
//! are standardized internally and coefficients are reported on the original
//! scale.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Design;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Max-norm of the score vector (standardized design) at convergence.
    pub gradient_tol: f64,
    pub max_iter: usize,
    /// Ridge penalty on standardized slopes. Zero unless working around
    /// separation; a non-zero value is reported on the fit.
    pub ridge: f64,
    /// `|linear predictor|` beyond which the fit is declared separated.
    pub separation_bound: f64,
    /// Covariate columns entering the model; `None` means all of them.
    pub columns: Option<Vec<usize>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-9,
            max_iter: 100,
            ridge: 0.0,
            separation_bound: 30.0,
            columns: None,
        }
    }
}

impl FitOptions {
    pub fn intercept_only() -> Self {
        Self {
            columns: Some(Vec::new()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BinaryLogistic,
    MultinomialLogistic,
}

#[derive(Debug, Clone)]
pub struct PropensityFit {
    pub kind: ModelKind,
    /// One `(p+1)`-vector per non-reference arm, intercept first.
    pub coefficients: Vec<Vec<f64>>,
    /// `n x K`; entry `(i, k)` estimates `P(Z_i = k | X_i)`.
    pub scores: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub log_likelihood: f64,
    pub ridge: f64,
    /// Covariate columns used by the model.
    pub columns: Vec<usize>,
    pub gradient_tol: f64,
}

impl PropensityFit {
    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    pub fn arms(&self) -> usize {
        self.scores.ncols()
    }

    /// `e_i = P(Z_i = 1 | X_i)` for a binary model.
    pub fn treated_scores(&self) -> Vec<f64> {
        self.scores.column(1).iter().copied().collect()
    }

    pub fn score(&self, unit: usize, arm: usize) -> f64 {
        self.scores[(unit, arm)]
    }

    /// Design matrix `[1, X_cols]` the model was fitted on.
    pub fn model_matrix(&self, design: &Design) -> DMatrix<f64> {
        model_matrix(design.covariates(), &self.columns)
    }
}

/// `[1, X[:, columns]]`.
pub fn model_matrix(x: &DMatrix<f64>, columns: &[usize]) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, columns.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            x[(i, columns[j - 1])]
        }
    })
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let t = eta.exp();
        t / (1.0 + t)
    }
}

/// `ln(1 + e^x)` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Result of the generic baseline-category logit solver.
#[derive(Debug, Clone)]
pub(crate) struct LogitFit {
    /// Original-scale coefficients, one block per non-reference class.
    pub coefficients: Vec<Vec<f64>>,
    /// `n x K` fitted class probabilities.
    pub probabilities: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

struct Standardized {
    /// `n x (q+1)` with a leading intercept column.
    design: DMatrix<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

fn standardize(x: &DMatrix<f64>) -> Result<Standardized> {
    let n = x.nrows();
    let q = x.ncols();
    let mut means = Vec::with_capacity(q);
    let mut scales = Vec::with_capacity(q);
    for j in 0..q {
        let col = x.column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::SingularDesign(format!(
                "covariate column {j} is constant, collinear with the intercept"
            )));
        }
        means.push(mean);
        scales.push(sd);
    }
    let design = DMatrix::from_fn(n, q + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (x[(i, j - 1)] - means[j - 1]) / scales[j - 1]
        }
    });
    // Full column rank check on the standardized Gram matrix.
    let gram = design.transpose() * &design / n as f64;
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 1e-12 * max) {
        return Err(Error::SingularDesign(format!(
            "design matrix is rank deficient (eigenvalue ratio {:.3e})",
            min / max
        )));
    }
    Ok(Standardized {
        design,
        means,
        scales,
    })
}

struct LogitProblem<'a> {
    x: &'a DMatrix<f64>,
    labels: &'a [usize],
    classes: usize,
    ridge: f64,
}

struct Evaluation {
    ll: f64,
    gradient: DVector<f64>,
    eta_max: f64,
}

impl LogitProblem<'_> {
    fn dim(&self) -> usize {
        (self.classes - 1) * self.x.ncols()
    }

    fn etas(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.x.ncols();
        let b = DMatrix::from_column_slice(d, self.classes - 1, beta.as_slice());
        self.x * b
    }

    /// Class probabilities from a row of non-reference linear predictors.
    fn probs_row(eta: &[f64], out: &mut [f64]) {
        let m = eta.iter().copied().fold(0.0f64, f64::max);
        let mut total = (-m).exp();
        out[0] = total;
        for (k, &e) in eta.iter().enumerate() {
            let v = (e - m).exp();
            out[k + 1] = v;
            total += v;
        }
        for v in out.iter_mut() {
            *v /= total;
        }
    }

    fn probabilities(&self, etas: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.x.nrows();
        let k = self.classes;
        let mut probs = DMatrix::zeros(n, k);
        let mut eta = vec![0.0; k - 1];
        let mut row = vec![0.0; k];
        for i in 0..n {
            for c in 0..k - 1 {
                eta[c] = etas[(i, c)];
            }
            if k == 2 {
                // Direct forms keep both tails accurate.
                row[1] = logistic(eta[0]);
                row[0] = logistic(-eta[0]);
            } else {
                Self::probs_row(&eta, &mut row);
            }
            for c in 0..k {
                probs[(i, c)] = row[c];
            }
        }
        probs
    }

    fn log_likelihood(&self, beta: &DVector<f64>) -> f64 {
        let etas = self.etas(beta);
        self.ll_from_etas(&etas, beta)
    }

    fn ll_from_etas(&self, etas: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
        let n = self.x.nrows();
        let k = self.classes;
        let mut ll = 0.0;
        for i in 0..n {
            let lse = if k == 2 {
                log1p_exp(etas[(i, 0)])
            } else {
                let m = (0..k - 1).map(|c| etas[(i, c)]).fold(0.0f64, f64::max);
                let s = (-m).exp() + (0..k - 1).map(|c| (etas[(i, c)] - m).exp()).sum::<f64>();
                m + s.ln()
            };
            let z = self.labels[i];
            let own = if z == 0 { 0.0 } else { etas[(i, z - 1)] };
            ll += own - lse;
        }
        ll - 0.5 * self.ridge * self.penalized_norm2(beta)
    }

    fn penalized_norm2(&self, beta: &DVector<f64>) -> f64 {
        if self.ridge == 0.0 {
            return 0.0;
        }
        let d = self.x.ncols();
        beta.iter()
            .enumerate()
            .filter(|(idx, _)| idx % d != 0)
            .map(|(_, b)| b * b)
            .sum()
    }

    fn evaluate(&self, beta: &DVector<f64>) -> (Evaluation, DMatrix<f64>) {
        let etas = self.etas(beta);
        let probs = self.probabilities(&etas);
        let ll = self.ll_from_etas(&etas, beta);
        let d = self.x.ncols();
        let n = self.x.nrows();
        let mut gradient = DVector::zeros(self.dim());
        for c in 1..self.classes {
            for i in 0..n {
                let resid = f64::from(u8::from(self.labels[i] == c)) - probs[(i, c)];
                for j in 0..d {
                    gradient[(c - 1) * d + j] += resid * self.x[(i, j)];
                }
            }
        }
        if self.ridge != 0.0 {
            for (idx, g) in gradient.iter_mut().enumerate() {
                if idx % d != 0 {
                    *g -= self.ridge * beta[idx];
                }
            }
        }
        let eta_max = etas.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (
            Evaluation {
                ll,
                gradient,
                eta_max,
            },
            probs,
        )
    }

    /// Negative Hessian (observed information).
    fn information(&self, probs: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.x.ncols();
        let n = self.x.nrows();
        let km1 = self.classes - 1;
        let mut info = DMatrix::zeros(self.dim(), self.dim());
        for a in 0..km1 {
            for b in a..km1 {
                let mut block = DMatrix::<f64>::zeros(d, d);
                for i in 0..n {
                    let pa = probs[(i, a + 1)];
                    let pb = probs[(i, b + 1)];
                    let w = if a == b { pa * (1.0 - pa) } else { -pa * pb };
                    for r in 0..d {
                        let xr = w * self.x[(i, r)];
                        for s in r..d {
                            block[(r, s)] += xr * self.x[(i, s)];
                        }
                    }
                }
                for r in 0..d {
                    for s in r..d {
                        let v = block[(r, s)];
                        info[(a * d + r, b * d + s)] = v;
                        info[(a * d + s, b * d + r)] = v;
                        info[(b * d + r, a * d + s)] = v;
                        info[(b * d + s, a * d + r)] = v;
                    }
                }
            }
        }
        if self.ridge != 0.0 {
            for idx in 0..self.dim() {
                if idx % d != 0 {
                    info[(idx, idx)] += self.ridge;
                }
            }
        }
        info
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Maximum-likelihood baseline-category logit of `labels` on `[1, x]`.
pub(crate) fn fit_logit(
    x: &DMatrix<f64>,
    labels: &[usize],
    classes: usize,
    options: &FitOptions,
) -> Result<LogitFit> {
    if classes < 2 {
        return Err(Error::Domain("logit needs at least two classes".into()));
    }
    if labels.len() != x.nrows() {
        return Err(Error::Domain("label/design length mismatch".into()));
    }
    let std = standardize(x)?;
    let problem = LogitProblem {
        x: &std.design,
        labels,
        classes,
        ridge: options.ridge,
    };
    let d = std.design.ncols();
    let n = x.nrows() as f64;

    // Start from the marginal class proportions.
    let mut beta = DVector::zeros(problem.dim());
    let mut counts = vec![0.0f64; classes];
    for &z in labels {
        counts[z] += 1.0;
    }
    if counts.contains(&0.0) {
        return Err(Error::Domain("a class has no units".into()));
    }
    for c in 1..classes {
        beta[(c - 1) * d] = (counts[c] / counts[0]).ln();
    }

    let (mut eval, mut probs) = problem.evaluate(&beta);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let gnorm = max_abs(&eval.gradient);
        if gnorm <= options.gradient_tol {
            converged = true;
            break;
        }
        if eval.eta_max > options.separation_bound {
            return Err(Error::Separation {
                max_eta: eval.eta_max,
                gradient_norm: gnorm,
            });
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;
        let info = problem.information(&probs);
        let direction = match info.clone().cholesky() {
            Some(chol) => chol.solve(&eval.gradient),
            // Numerically singular curvature: plain gradient step.
            None => &eval.gradient / (n * 0.25),
        };
        // Near the optimum the log-likelihood change drops below its own
        // rounding error; there a step is accepted if it shrinks the gradient.
        let slack = 1e-12 * (1.0 + eval.ll.abs());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &beta + &direction * step;
            let ll = problem.log_likelihood(&candidate);
            if ll.is_finite() && ll >= eval.ll {
                accepted = Some(candidate);
                break;
            }
            if ll.is_finite() && ll >= eval.ll - slack {
                let (e, _) = problem.evaluate(&candidate);
                if max_abs(&e.gradient) < gnorm {
                    accepted = Some(candidate);
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some(candidate) => {
                beta = candidate;
                let (e, p) = problem.evaluate(&beta);
                eval = e;
                probs = p;
            }
            None => break,
        }
    }
    let gnorm = max_abs(&eval.gradient);
    if eval.eta_max > options.separation_bound {
        return Err(Error::Separation {
            max_eta: eval.eta_max,
            gradient_norm: gnorm,
        });
    }
    let coefficients = back_transform(&beta, &std, classes);
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            gradient_norm: gnorm,
            last_coefficients: coefficients.concat(),
        });
    }
    Ok(LogitFit {
        coefficients,
        probabilities: probs,
        converged,
        iterations,
        gradient_norm: gnorm,
        log_likelihood: eval.ll,
    })
}

fn back_transform(beta: &DVector<f64>, std: &Standardized, classes: usize) -> Vec<Vec<f64>> {
    let d = std.design.ncols();
    (1..classes)
        .map(|c| {
            let block = &beta.as_slice()[(c - 1) * d..c * d];
            let mut out = vec![0.0; d];
            let mut intercept = block[0];
            for j in 1..d {
                out[j] = block[j] / std.scales[j - 1];
                intercept -= out[j] * std.means[j - 1];
            }
            out[0] = intercept;
            out
        })
        .collect()
}

fn selected_columns(design: &Design, options: &FitOptions) -> Result<Vec<usize>> {
    let columns: Vec<usize> = match &options.columns {
        Some(c) => c.clone(),
        None => (0..design.p()).collect(),
    };
    if let Some(&bad) = columns.iter().find(|&&c| c >= design.p()) {
        return Err(Error::Domain(format!("covariate column {bad} out of range")));
    }
    Ok(columns)
}

fn fit_propensity(design: &Design, options: &FitOptions, kind: ModelKind) -> Result<PropensityFit> {
    let columns = selected_columns(design, options)?;
    let x = design.covariates().select_columns(columns.iter());
    let fit = fit_logit(&x, design.treatment(), design.arms(), options)?;
    Ok(PropensityFit {
        kind,
        coefficients: fit.coefficients,
        scores: fit.probabilities,
        converged: fit.converged,
        iterations: fit.iterations,
        final_gradient_norm: fit.gradient_norm,
        log_likelihood: fit.log_likelihood,
        ridge: options.ridge,
        columns,
        gradient_tol: options.gradient_tol,
    })
}

/// Logistic regression of the binary treatment on `[1, X]`.
pub fn fit_binary_logistic(design: &Design, options: &FitOptions) -> Result<PropensityFit> {
    if design.arms() != 2 {
        return Err(Error::Domain(format!(
            "binary logistic model needs 2 arms, data has {}",
            design.arms()
        )));
    }
    fit_propensity(design, options, ModelKind::BinaryLogistic)
}

/// Baseline-category logit with arm 0 as reference, for any `K >= 2`.
pub fn fit_multinomial_logistic(design: &Design, options: &FitOptions) -> Result<PropensityFit> {
    fit_propensity(design, options, ModelKind::MultinomialLogistic)
}

/// Fits the binary model for two arms and the multinomial model otherwise.
pub fn fit(design: &Design, options: &FitOptions) -> Result<PropensityFit> {
    if design.arms() == 2 {
        fit_binary_logistic(design, options)
    } else {
        fit_multinomial_logistic(design, options)
    }
}

/// `P(Z = 1 | x)` for a binary model at coefficients `beta` over `model_matrix`.
pub fn binary_scores(model_matrix: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    (model_matrix * b).iter().map(|&eta| logistic(eta)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(x: Vec<f64>, p: usize, z: Vec<usize>, arms: usize) -> Design {
        let n = z.len();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Design::new(DMatrix::from_row_slice(n, p, &x), names, z, arms, Vec::new()).unwrap()
    }

    #[test]
    fn intercept_only_binary_is_sample_proportion() {
        let d = design(vec![], 0, vec![1, 0, 1, 0, 1, 0], 2);
        let fit = fit_binary_logistic(&d, &FitOptions::default()).unwrap();
        for i in 0..6 {
            assert!((fit.score(i, 1) - 0.5).abs() < 1e-12);
        }
        assert!(fit.converged);
    }

    #[test]
    fn intercept_only_multinomial_is_proportions() {
        let z = vec![0, 0, 1, 1, 1, 2, 2, 2, 2, 2];
        let d = design(vec![], 0, z, 3);
        let fit = fit_multinomial_logistic(&d, &FitOptions::default()).unwrap();
        for i in 0..10 {
            assert!((fit.score(i, 0) - 0.2).abs() < 1e-12);
            assert!((fit.score(i, 1) - 0.3).abs() < 1e-12);
            assert!((fit.score(i, 2) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_separation_is_detected() {
        let x = vec![-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0];
        let z = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let d = design(x, 1, z, 2);
        let err = fit_binary_logistic(&d, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Separation { .. }), "{err}");
    }

    #[test]
    fn ridge_works_around_separation() {
        let x = vec![-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0];
        let z = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let d = design(x, 1, z, 2);
        let opts = FitOptions {
            ridge: 1.0,
            ..FitOptions::default()
        };
        let fit = fit_binary_logistic(&d, &opts).unwrap();
        assert_eq!(fit.ridge, 1.0);
        assert!(fit.converged);
    }

    #[test]
    fn constant_column_is_singular() {
        let x = vec![1.0; 6];
        let d = design(x, 1, vec![0, 1, 0, 1, 1, 0], 2);
        assert!(matches!(
            fit_binary_logistic(&d, &FitOptions::default()),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn duplicated_column_is_singular() {
        let base = [0.3, -1.2, 0.8, 2.0, -0.4, 1.1];
        let x: Vec<f64> = base.iter().flat_map(|&v| [v, 2.0 * v]).collect();
        let d = design(x, 2, vec![0, 1, 0, 1, 1, 0], 2);
        assert!(matches!(
            fit_binary_logistic(&d, &FitOptions::default()),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let x = vec![-1.0, 0.2, 0.4, -0.3, 1.5, 0.9, -2.0, 0.1];
        let z = vec![0, 1, 0, 0, 1, 1, 0, 1];
        let d = design(x, 1, z, 2);
        let opts = FitOptions {
            max_iter: 1,
            ..FitOptions::default()
        };
        match fit_binary_logistic(&d, &opts).unwrap_err() {
            Error::NonConvergence {
                iterations,
                last_coefficients,
                ..
            } => {
                assert_eq!(iterations, 1);
                assert_eq!(last_coefficients.len(), 2);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn binary_rejects_three_arms() {
        let d = design(vec![], 0, vec![0, 1, 2, 0, 1, 2], 3);
        assert!(matches!(
            fit_binary_logistic(&d, &FitOptions::default()),
            Err(Error::Domain(_))
        ));
    }
}
