use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::propensity::logistic;

/// Coefficient of the centred quadratic `X_1^2 - 1` inside the propensity
/// linear predictor when the propensity model is misspecified.
pub const PROPENSITY_QUADRATIC: f64 = 0.5;
/// Coefficient of `X_1^2 - 1` in the outcome when the outcome model is
/// misspecified.
pub const OUTCOME_QUADRATIC: f64 = 1.0;

/// Data-generating process with tunable overlap and effect heterogeneity.
///
/// With `X ~ N(0, I_p)`, `u = a'X` for the fixed unit vector
/// `a = (1, ..., 1) / sqrt(p)`:
///
/// * true score `e(X) = logistic(overlap * (u + score_offset [+ 0.5 (X_1^2 - 1)]))`
/// * effect `tau(X) = base_effect + heterogeneity * u`
/// * continuous outcome `Y = tau(X) Z + b'X [+ (X_1^2 - 1)] + noise_sd * eps`,
///   `b = (1, ..., 1)`
/// * binary outcome `Y ~ Bernoulli(logistic(tau(X) Z + b'X [+ (X_1^2 - 1)]))`
///
/// Bracketed terms are switched on by the misspecification flags; the
/// fitted models are always linear in `X`. `overlap = 0` is a 1:1
/// randomized trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    /// Scale of the propensity coefficients; 0 gives constant scores.
    pub overlap: f64,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default = "default_effect")]
    pub base_effect: f64,
    #[serde(default = "default_family")]
    pub outcome_family: OutcomeFamily,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    /// Shift of the propensity index. Without it the tilting functions are
    /// symmetric in `u` and every tilted estimand collapses to the ATE.
    #[serde(default = "default_offset")]
    pub score_offset: f64,
    #[serde(default)]
    pub misspecified_propensity: bool,
    #[serde(default)]
    pub misspecified_outcome: bool,
}

fn default_p() -> usize {
    3
}
fn default_effect() -> f64 {
    1.0
}
fn default_family() -> OutcomeFamily {
    OutcomeFamily::Continuous
}
fn default_noise() -> f64 {
    1.0
}
fn default_offset() -> f64 {
    0.5
}

impl DgpConfig {
    pub fn new(n: usize, p: usize, overlap: f64, heterogeneity: f64) -> Self {
        Self {
            n,
            p,
            overlap,
            heterogeneity,
            base_effect: default_effect(),
            outcome_family: default_family(),
            noise_sd: default_noise(),
            score_offset: default_offset(),
            misspecified_propensity: false,
            misspecified_outcome: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::Config(format!("n must be at least 50, got {}", self.n)));
        }
        if self.p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        if self.n < self.p + 2 {
            return Err(Error::Config("n must be at least p + 2".into()));
        }
        if !(self.overlap >= 0.0 && self.overlap.is_finite()) {
            return Err(Error::Config(format!("overlap must be >= 0, got {}", self.overlap)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd must be >= 0, got {}", self.noise_sd)));
        }
        for (name, v) in [
            ("heterogeneity", self.heterogeneity),
            ("base_effect", self.base_effect),
            ("score_offset", self.score_offset),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Propensity index direction `a`.
    pub fn score_direction(&self) -> Vec<f64> {
        vec![1.0 / (self.p as f64).sqrt(); self.p]
    }

    /// Effect-modifier direction; equal to the score direction.
    pub fn effect_direction(&self) -> Vec<f64> {
        self.score_direction()
    }

    /// Prognostic coefficients `b`.
    pub fn prognostic(&self) -> Vec<f64> {
        vec![1.0; self.p]
    }

    /// True score given `u = a'X` and the first covariate.
    pub fn true_score(&self, u: f64, x1: f64) -> f64 {
        logistic(self.overlap * self.score_index(u, x1))
    }

    pub(crate) fn score_index(&self, u: f64, x1: f64) -> f64 {
        let mut index = u + self.score_offset;
        if self.misspecified_propensity {
            index += PROPENSITY_QUADRATIC * (x1 * x1 - 1.0);
        }
        index
    }

    pub fn effect(&self, u: f64) -> f64 {
        self.base_effect + self.heterogeneity * u
    }

    /// Outcome linear predictor without the treatment term, given
    /// `b'X` and `X_1`.
    pub(crate) fn baseline_index(&self, prognostic: f64, x1: f64) -> f64 {
        if self.misspecified_outcome {
            prognostic + OUTCOME_QUADRATIC * (x1 * x1 - 1.0)
        } else {
            prognostic
        }
    }
}

/// One draw from the process together with the true scores.
pub fn generate_with_scores(config: &DgpConfig, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (config.n, config.p);
    let a = config.score_direction();
    let b = config.prognostic();
    let mut x = DMatrix::zeros(n, p);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
        let row = x.row(i);
        let u: f64 = row.iter().zip(&a).map(|(x, a)| x * a).sum();
        let prog: f64 = row.iter().zip(&b).map(|(x, b)| x * b).sum();
        let x1 = row[0];
        let e = config.true_score(u, x1);
        let zi = usize::from(rng.random::<f64>() < e);
        let index = config.effect(u) * zi as f64 + config.baseline_index(prog, x1);
        let noise: f64 = rng.sample(StandardNormal);
        let yi = match config.outcome_family {
            OutcomeFamily::Continuous => index + config.noise_sd * noise,
            OutcomeFamily::Binary => f64::from(u8::from(rng.random::<f64>() < logistic(index))),
        };
        scores.push(e);
        z.push(zi);
        y.push(yi);
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    let data = Dataset::from_parts(x, names, z, 2, y, config.outcome_family)?;
    Ok((data, scores))
}

/// Deterministic in `(config, seed)`.
pub fn generate(config: &DgpConfig, seed: u64) -> Result<Dataset> {
    generate_with_scores(config, seed).map(|(d, _)| d)
}
