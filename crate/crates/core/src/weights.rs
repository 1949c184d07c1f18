//! Balancing weights `w_i = h(e_i) / P(Z = z_i | X_i)` for the tilting
//! functions `h` of the usual estimands, plus symmetric trimming and Kish
//! effective sample sizes.
//!
//! Weights are returned unnormalized; the estimators normalize within arm.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::data::{format_real, Design};
use crate::error::{Error, Result};
use crate::propensity::{self, FitOptions, PropensityFit};

/// Tilting function identifying the target population of a binary
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tilting {
    /// `h = 1`
    Ate,
    /// `h = e`
    Att,
    /// `h = e(1-e)`
    Overlap,
    /// `h = min(e, 1-e)`
    Matching,
    /// `h = -e ln e - (1-e) ln(1-e)`
    Entropy,
}

impl Tilting {
    pub const ALL: [Tilting; 5] = [
        Tilting::Ate,
        Tilting::Att,
        Tilting::Overlap,
        Tilting::Matching,
        Tilting::Entropy,
    ];

    /// `h(e)`; `e0 = 1 - e` is passed separately so both tails stay exact.
    pub(crate) fn eval(self, e: f64, e0: f64) -> f64 {
        match self {
            Tilting::Ate => 1.0,
            Tilting::Att => e,
            Tilting::Overlap => e * e0,
            Tilting::Matching => e.min(e0),
            Tilting::Entropy => -(e * e.ln()) - e0 * e0.ln(),
        }
    }

    /// `dh/de`.
    pub(crate) fn derivative(self, e: f64, e0: f64) -> f64 {
        match self {
            Tilting::Ate => 0.0,
            Tilting::Att => 1.0,
            Tilting::Overlap => e0 - e,
            Tilting::Matching => {
                if e < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Tilting::Entropy => (e0 / e).ln(),
        }
    }
}

/// Tilting value `h(e)` for `e` in the open unit interval.
pub fn tilting_value(e: f64, tilting: Tilting) -> Result<f64> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::Domain(format!("propensity {e} outside (0, 1)")));
    }
    Ok(tilting.eval(e, 1.0 - e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScheme {
    Iptw,
    Treated,
    Overlap,
    Matching,
    Entropy,
    /// IPTW on units with `alpha <= e <= 1 - alpha`.
    Trimmed { alpha: f64 },
    /// IPTW times the marginal proportion of the unit's own arm.
    Stabilized,
    /// IPTW times the harmonic mean of the generalized propensity scores.
    GeneralizedOverlap,
}

pub const DEFAULT_TRIM_ALPHA: f64 = 0.1;

impl WeightScheme {
    pub fn trimmed(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Domain(format!(
                "trimming threshold {alpha} outside (0, 0.5)"
            )));
        }
        Ok(WeightScheme::Trimmed { alpha })
    }

    /// Tilting function, if the scheme is a binary balancing weight.
    pub fn tilting(self) -> Option<Tilting> {
        match self {
            WeightScheme::Iptw | WeightScheme::Stabilized => Some(Tilting::Ate),
            WeightScheme::Treated => Some(Tilting::Att),
            WeightScheme::Overlap => Some(Tilting::Overlap),
            WeightScheme::Matching => Some(Tilting::Matching),
            WeightScheme::Entropy => Some(Tilting::Entropy),
            WeightScheme::Trimmed { .. } | WeightScheme::GeneralizedOverlap => None,
        }
    }

    pub fn estimand_label(self) -> &'static str {
        match self {
            WeightScheme::Iptw | WeightScheme::Stabilized => "ATE",
            WeightScheme::Treated => "ATT",
            WeightScheme::Overlap => "ATO",
            WeightScheme::Matching => "matching",
            WeightScheme::Entropy => "entropy",
            WeightScheme::Trimmed { .. } => "trimmed-ATE",
            WeightScheme::GeneralizedOverlap => "generalized-ATO",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Iptw => "iptw",
            WeightScheme::Treated => "att",
            WeightScheme::Overlap => "overlap",
            WeightScheme::Matching => "matching",
            WeightScheme::Entropy => "entropy",
            WeightScheme::Trimmed { .. } => "trimmed",
            WeightScheme::Stabilized => "stabilized",
            WeightScheme::GeneralizedOverlap => "generalized-overlap",
        }
    }

    pub fn check_arms(self, arms: usize) -> Result<()> {
        if arms != 2 && self != WeightScheme::GeneralizedOverlap {
            return Err(Error::Domain(
                "scheme requires binary treatment; use generalized-overlap".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::Trimmed { alpha } => write!(f, "trimmed:{alpha}"),
            other => f.write_str(other.name()),
        }
    }
}

impl Serialize for WeightScheme {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    /// Accepts the names from [`WeightScheme::name`]; `trimmed` takes an
    /// optional threshold as `trimmed:0.05`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, arg) = match lower.split_once(':') {
            Some((h, a)) => (h.to_string(), Some(a.to_string())),
            None => (lower.clone(), None),
        };
        let scheme = match head.as_str() {
            "iptw" | "ate" => WeightScheme::Iptw,
            "att" | "treated" => WeightScheme::Treated,
            "overlap" | "ow" | "ato" => WeightScheme::Overlap,
            "matching" => WeightScheme::Matching,
            "entropy" => WeightScheme::Entropy,
            "stabilized" => WeightScheme::Stabilized,
            "generalized-overlap" | "gow" => WeightScheme::GeneralizedOverlap,
            "trimmed" => {
                let alpha = match arg.as_deref() {
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad trimming threshold `{a}`")))?,
                    None => DEFAULT_TRIM_ALPHA,
                };
                return WeightScheme::trimmed(alpha);
            }
            _ => return Err(Error::Config(format!("unknown weighting scheme `{s}`"))),
        };
        if arg.is_some() {
            return Err(Error::Config(format!("scheme `{head}` takes no argument")));
        }
        Ok(scheme)
    }
}

#[derive(Debug, Clone)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub scheme: WeightScheme,
    /// False only for units removed by trimming.
    pub kept: Vec<bool>,
    pub ess_per_arm: Vec<f64>,
}

impl WeightVector {
    fn build(
        weights: Vec<f64>,
        kept: Vec<bool>,
        scheme: WeightScheme,
        design: &Design,
    ) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Internal(format!(
                "invalid weight {} at unit {i}",
                weights[i]
            )));
        }
        let arms = design.arms();
        let mut total = vec![0.0; arms];
        let mut total_sq = vec![0.0; arms];
        let mut kept_count = vec![0usize; arms];
        for (i, &z) in design.treatment().iter().enumerate() {
            if kept[i] {
                total[z] += weights[i];
                total_sq[z] += weights[i] * weights[i];
                kept_count[z] += 1;
            }
        }
        for a in 0..arms {
            if kept_count[a] == 0 {
                return Err(Error::Domain(format!("all units trimmed in arm {a}")));
            }
            if !(total[a] > 0.0) {
                return Err(Error::Domain(format!("arm {a} has zero total weight")));
            }
        }
        let ess_per_arm = total
            .iter()
            .zip(&total_sq)
            .map(|(s, s2)| s * s / s2)
            .collect();
        Ok(Self {
            weights,
            scheme,
            kept,
            ess_per_arm,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same weights multiplied by `factor` within `arm`.
    pub fn rescaled_arm(&self, design: &Design, arm: usize, factor: f64) -> Self {
        let mut out = self.clone();
        for (i, &z) in design.treatment().iter().enumerate() {
            if z == arm {
                out.weights[i] *= factor;
            }
        }
        out
    }
}

fn check_fit(fit: &PropensityFit, design: &Design) -> Result<()> {
    if fit.n() != design.n() || fit.arms() != design.arms() {
        return Err(Error::Domain(format!(
            "propensity fit is {}x{} but data has {} units and {} arms",
            fit.n(),
            fit.arms(),
            design.n(),
            design.arms()
        )));
    }
    Ok(())
}

/// `h(e) / e` for treated units and `h(e) / (1 - e)` for controls.
pub(crate) fn binary_weight(tilting: Tilting, treated: bool, e: f64, e0: f64) -> f64 {
    let h = tilting.eval(e, e0);
    match (tilting, treated) {
        // Closed forms avoid a 0/0 in the far tails.
        (Tilting::Overlap, true) => e0,
        (Tilting::Overlap, false) => e,
        (Tilting::Att, true) => 1.0,
        (_, true) => h / e,
        (_, false) => h / e0,
    }
}

/// `dw/de` of [`binary_weight`].
pub(crate) fn binary_weight_derivative(tilting: Tilting, treated: bool, e: f64, e0: f64) -> f64 {
    let h = tilting.eval(e, e0);
    let dh = tilting.derivative(e, e0);
    if treated {
        (dh * e - h) / (e * e)
    } else {
        (dh * e0 + h) / (e0 * e0)
    }
}

/// Per-unit weights for `scheme`.
pub fn compute_weights(
    fit: &PropensityFit,
    design: &Design,
    scheme: WeightScheme,
) -> Result<WeightVector> {
    check_fit(fit, design)?;
    scheme.check_arms(design.arms())?;
    match scheme {
        WeightScheme::GeneralizedOverlap => return generalized_overlap_weights(fit, design),
        WeightScheme::Trimmed { alpha } => return trim(fit, design, alpha),
        _ => {}
    }
    let tilting = scheme.tilting().expect("binary scheme has a tilting");
    let n = design.n();
    let counts = design.arm_counts();
    let mut weights = Vec::with_capacity(n);
    for (i, &z) in design.treatment().iter().enumerate() {
        let e = fit.score(i, 1);
        let e0 = fit.score(i, 0);
        let mut w = binary_weight(tilting, z == 1, e, e0);
        if scheme == WeightScheme::Stabilized {
            w *= counts[z] as f64 / n as f64;
        }
        weights.push(w);
    }
    WeightVector::build(weights, vec![true; n], scheme, design)
}

/// `w_i = (1 / e_{i,z_i}) * [sum_k 1 / e_{ik}]^{-1}` for any number of arms.
pub fn generalized_overlap_weights(fit: &PropensityFit, design: &Design) -> Result<WeightVector> {
    check_fit(fit, design)?;
    let weights = design
        .treatment()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let inv_sum: f64 = (0..design.arms()).map(|k| 1.0 / fit.score(i, k)).sum();
            (1.0 / fit.score(i, z)) / inv_sum
        })
        .collect();
    WeightVector::build(
        weights,
        vec![true; design.n()],
        WeightScheme::GeneralizedOverlap,
        design,
    )
}

/// IPTW restricted to units with `alpha <= e <= 1 - alpha`, using the
/// scores of `fit` unchanged.
pub fn trim(fit: &PropensityFit, design: &Design, alpha: f64) -> Result<WeightVector> {
    check_fit(fit, design)?;
    let scheme = WeightScheme::trimmed(alpha)?;
    scheme.check_arms(design.arms())?;
    let mut weights = Vec::with_capacity(design.n());
    let mut kept = Vec::with_capacity(design.n());
    for (i, &z) in design.treatment().iter().enumerate() {
        let e = fit.score(i, 1);
        let keep = e >= alpha && e <= 1.0 - alpha;
        kept.push(keep);
        weights.push(if keep {
            binary_weight(Tilting::Ate, z == 1, e, fit.score(i, 0))
        } else {
            0.0
        });
    }
    WeightVector::build(weights, kept, scheme, design)
}

/// Trimming variant that refits the propensity model on the retained units
/// before computing IPTW weights. Trimmed units keep weight zero.
pub fn trim_with_refit(
    fit: &PropensityFit,
    design: &Design,
    alpha: f64,
    options: &FitOptions,
) -> Result<WeightVector> {
    let first = trim(fit, design, alpha)?;
    let rows: Vec<usize> = (0..design.n()).filter(|&i| first.kept[i]).collect();
    let sub = design.select(&rows)?;
    let refit = propensity::fit_binary_logistic(&sub, options)?;
    let mut weights = vec![0.0; design.n()];
    for (r, &i) in rows.iter().enumerate() {
        let z = design.treatment()[i];
        weights[i] = binary_weight(Tilting::Ate, z == 1, refit.score(r, 1), refit.score(r, 0));
    }
    WeightVector::build(weights, first.kept, first.scheme, design)
}

/// Kish effective sample size `(sum w)^2 / sum w^2` over kept units of `arm`.
pub fn effective_sample_size(w: &WeightVector, design: &Design, arm: usize) -> Result<f64> {
    let mut s = 0.0;
    let mut s2 = 0.0;
    let mut count = 0;
    for (i, &z) in design.treatment().iter().enumerate() {
        if z == arm && w.kept[i] {
            s += w.weights[i];
            s2 += w.weights[i] * w.weights[i];
            count += 1;
        }
    }
    if count == 0 || s2 == 0.0 {
        return Err(Error::Domain(format!("arm {arm} has no weighted units")));
    }
    Ok(s * s / s2)
}

/// Kish ESS of a bare weight slice.
pub fn kish_ess(weights: &[f64]) -> Result<f64> {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if weights.is_empty() || s2 == 0.0 {
        return Err(Error::Domain("empty weight set".into()));
    }
    Ok(s * s / s2)
}

/// Writes `unit_id, arm, score, weight, kept`. `score` is `P(Z = 1 | X)`
/// for two arms and `P(Z = own arm | X)` otherwise.
pub fn write_weights_csv<W: std::io::Write>(
    w: &WeightVector,
    design: &Design,
    fit: &PropensityFit,
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["unit_id", "arm", "score", "weight", "kept"])?;
    for (i, &z) in design.treatment().iter().enumerate() {
        let score = if design.arms() == 2 {
            fit.score(i, 1)
        } else {
            fit.score(i, z)
        };
        out.write_record([
            i.to_string(),
            design.arm_labels()[z].clone(),
            format_real(score),
            format_real(w.weights[i]),
            w.kept[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads weights written by [`write_weights_csv`] back against `design`.
pub fn read_weights_csv<R: std::io::Read>(
    reader: R,
    design: &Design,
    scheme: WeightScheme,
) -> Result<WeightVector> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut weights = vec![f64::NAN; design.n()];
    let mut kept = vec![false; design.n()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let bad = |column: &str, reason: &str| Error::Ingestion {
            row: row + 1,
            column: column.to_string(),
            reason: reason.to_string(),
        };
        let unit: usize = record
            .get(0)
            .and_then(|v| v.parse().ok())
            .filter(|&u| u < design.n())
            .ok_or_else(|| bad("unit_id", "invalid unit id"))?;
        weights[unit] = record
            .get(3)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("weight", "invalid weight"))?;
        kept[unit] = record
            .get(4)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("kept", "invalid flag"))?;
    }
    if weights.iter().any(|w| w.is_nan()) {
        return Err(Error::Domain("weights file does not cover every unit".into()));
    }
    WeightVector::build(weights, kept, scheme, design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propensity::ModelKind;
    use nalgebra::DMatrix;

    fn fit_from_scores(e: &[f64]) -> PropensityFit {
        let n = e.len();
        PropensityFit {
            kind: ModelKind::BinaryLogistic,
            coefficients: vec![vec![0.0]],
            scores: DMatrix::from_fn(n, 2, |i, k| if k == 1 { e[i] } else { 1.0 - e[i] }),
            converged: true,
            iterations: 0,
            final_gradient_norm: 0.0,
            log_likelihood: 0.0,
            ridge: 0.0,
            columns: vec![],
            gradient_tol: 1e-9,
        }
    }

    fn design(z: &[usize]) -> Design {
        Design::new(DMatrix::zeros(z.len(), 0), vec![], z.to_vec(), 2, vec![]).unwrap()
    }

    #[test]
    fn tilting_values() {
        assert_eq!(tilting_value(0.5, Tilting::Overlap).unwrap(), 0.25);
        assert_eq!(tilting_value(0.3, Tilting::Att).unwrap(), 0.3);
        assert_eq!(tilting_value(0.3, Tilting::Ate).unwrap(), 1.0);
        assert_eq!(tilting_value(0.3, Tilting::Matching).unwrap(), 0.3);
        assert_eq!(tilting_value(0.8, Tilting::Matching).unwrap(), 1.0 - 0.8);
        let ent = tilting_value(0.5, Tilting::Entropy).unwrap();
        assert!((ent - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(tilting_value(0.0, Tilting::Ate).is_err());
        assert!(tilting_value(1.0, Tilting::Overlap).is_err());
        assert!(tilting_value(f64::NAN, Tilting::Overlap).is_err());
    }

    #[test]
    fn overlap_weight_is_opposite_probability() {
        let fit = fit_from_scores(&[0.8, 0.8, 0.4]);
        let d = design(&[1, 0, 1]);
        let w = compute_weights(&fit, &d, WeightScheme::Overlap).unwrap();
        assert!((w.weights[0] - 0.2).abs() < 1e-15);
        assert!((w.weights[1] - 0.8).abs() < 1e-15);
        assert!((w.weights[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn scheme_formulas() {
        let e = 0.7;
        let fit = fit_from_scores(&[e, e]);
        let d = design(&[1, 0]);
        let get = |s| compute_weights(&fit, &d, s).unwrap().weights;
        let iptw = get(WeightScheme::Iptw);
        assert!((iptw[0] - 1.0 / e).abs() < 1e-12 && (iptw[1] - 1.0 / (1.0 - e)).abs() < 1e-12);
        let att = get(WeightScheme::Treated);
        assert!((att[0] - 1.0).abs() < 1e-12 && (att[1] - e / (1.0 - e)).abs() < 1e-12);
        let m = get(WeightScheme::Matching);
        assert!((m[0] - 0.3 / 0.7).abs() < 1e-12 && (m[1] - 1.0).abs() < 1e-12);
        let h = -(e * e.ln()) - (1.0 - e) * (1.0 - e).ln();
        let ent = get(WeightScheme::Entropy);
        assert!((ent[0] - h / e).abs() < 1e-12 && (ent[1] - h / (1.0 - e)).abs() < 1e-12);
        let st = get(WeightScheme::Stabilized);
        assert!((st[0] - 0.5 / e).abs() < 1e-12 && (st[1] - 0.5 / (1.0 - e)).abs() < 1e-12);
    }

    #[test]
    fn weight_derivatives_match_finite_differences() {
        let h = 1e-6;
        for tilting in Tilting::ALL {
            for &treated in &[true, false] {
                for &e in &[0.1, 0.35, 0.62, 0.9] {
                    let f = |e: f64| binary_weight(tilting, treated, e, 1.0 - e);
                    let fd = (f(e + h) - f(e - h)) / (2.0 * h);
                    let an = binary_weight_derivative(tilting, treated, e, 1.0 - e);
                    assert!(
                        (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                        "{tilting:?} treated={treated} e={e}: {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn trimming_thresholds() {
        let fit = fit_from_scores(&[0.05, 0.5, 0.95, 0.3, 0.6]);
        let d = design(&[1, 0, 1, 0, 1]);
        let w = trim(&fit, &d, 0.1).unwrap();
        assert_eq!(w.kept, vec![false, true, false, true, true]);
        assert_eq!(w.weights[0], 0.0);
        assert_eq!(w.weights[2], 0.0);
        assert!((w.weights[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trimming_noop_inside_bounds() {
        let e = [0.2, 0.5, 0.8, 0.35];
        let fit = fit_from_scores(&e);
        let d = design(&[1, 0, 1, 0]);
        let t = trim(&fit, &d, 0.1).unwrap();
        let i = compute_weights(&fit, &d, WeightScheme::Iptw).unwrap();
        assert_eq!(t.weights, i.weights);
        assert!(t.kept.iter().all(|&k| k));
    }

    #[test]
    fn trimming_everything_in_an_arm_fails() {
        let fit = fit_from_scores(&[0.95, 0.5, 0.97]);
        let d = design(&[1, 0, 1]);
        assert!(matches!(trim(&fit, &d, 0.1), Err(Error::Domain(_))));
        assert!(trim(&fit, &d, 0.5).is_err());
    }

    #[test]
    fn kish_examples() {
        assert!((kish_ess(&[2.0; 5]).unwrap() - 5.0).abs() < 1e-12);
        assert!((kish_ess(&[1.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(kish_ess(&[]).is_err());
    }

    #[test]
    fn ess_per_arm_matches_function() {
        let fit = fit_from_scores(&[0.2, 0.4, 0.7, 0.9, 0.55]);
        let d = design(&[1, 0, 1, 0, 1]);
        let w = compute_weights(&fit, &d, WeightScheme::Iptw).unwrap();
        for arm in 0..2 {
            let ess = effective_sample_size(&w, &d, arm).unwrap();
            assert!((ess - w.ess_per_arm[arm]).abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_symmetric_case() {
        let n = 3;
        let fit = PropensityFit {
            scores: DMatrix::from_element(n, 3, 1.0 / 3.0),
            coefficients: vec![vec![0.0], vec![0.0]],
            kind: ModelKind::MultinomialLogistic,
            ..fit_from_scores(&[0.5; 3])
        };
        let d = Design::new(DMatrix::zeros(3, 0), vec![], vec![0, 1, 2], 3, vec![]).unwrap();
        let w = generalized_overlap_weights(&fit, &d).unwrap();
        for v in w.weights {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn binary_schemes_reject_three_arms() {
        let fit = PropensityFit {
            scores: DMatrix::from_element(3, 3, 1.0 / 3.0),
            ..fit_from_scores(&[0.5; 3])
        };
        let d = Design::new(DMatrix::zeros(3, 0), vec![], vec![0, 1, 2], 3, vec![]).unwrap();
        let err = compute_weights(&fit, &d, WeightScheme::Overlap).unwrap_err();
        assert!(err.to_string().contains("use generalized-overlap"));
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("overlap".parse::<WeightScheme>().unwrap(), WeightScheme::Overlap);
        assert_eq!(
            "trimmed".parse::<WeightScheme>().unwrap(),
            WeightScheme::Trimmed { alpha: 0.1 }
        );
        assert_eq!(
            "trimmed:0.05".parse::<WeightScheme>().unwrap(),
            WeightScheme::Trimmed { alpha: 0.05 }
        );
        assert!("trimmed:0.7".parse::<WeightScheme>().is_err());
        assert!("bogus".parse::<WeightScheme>().is_err());
        for s in ["iptw", "att", "overlap", "matching", "entropy", "stabilized", "generalized-overlap"] {
            let scheme: WeightScheme = s.parse().unwrap();
            assert_eq!(scheme.to_string(), s);
        }
    }
}
