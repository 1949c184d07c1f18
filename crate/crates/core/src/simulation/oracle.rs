//! Population values of the tilted estimands of a [`DgpConfig`].
//!
//! Every quantity depends on `X` only through `u = a'X` and `X_1`, which
//! are jointly normal with `X_1 = u / sqrt(p) + sqrt(1 - 1/p) v` for an
//! independent standard normal `v`. The expectations are therefore one- or
//! two-dimensional Gaussian integrals, evaluated by composite Simpson rules
//! on `[-9, 9]`.

use serde::Serialize;

use super::dgp::DgpConfig;
use crate::data::OutcomeFamily;
use crate::error::Result;
use crate::propensity::logistic;
use crate::weights::Tilting;

const HALF_WIDTH: f64 = 9.0;
const INTERVALS_1D: usize = 6000;
const INTERVALS_2D: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueEstimands {
    pub ate: f64,
    pub att: f64,
    pub ato: f64,
    pub matching: f64,
    pub entropy: f64,
}

impl TrueEstimands {
    pub fn get(&self, tilting: Tilting) -> f64 {
        match tilting {
            Tilting::Ate => self.ate,
            Tilting::Att => self.att,
            Tilting::Overlap => self.ato,
            Tilting::Matching => self.matching,
            Tilting::Entropy => self.entropy,
        }
    }
}

fn simpson_nodes(intervals: usize) -> Vec<(f64, f64)> {
    let h = 2.0 * HALF_WIDTH / intervals as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    (0..=intervals)
        .map(|k| {
            let x = -HALF_WIDTH + k as f64 * h;
            let coef = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (x, coef * h / 3.0 * norm * (-0.5 * x * x).exp())
        })
        .collect()
}

struct Integrand<'a> {
    config: &'a DgpConfig,
    root_p: f64,
    perp: f64,
}

impl Integrand<'_> {
    /// `(e(X), conditional effect)` at `(u, v)`.
    fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        let c = self.config;
        let x1 = u / self.root_p + self.perp * v;
        let e = c.true_score(u, x1);
        let tau = c.effect(u);
        let effect = match c.outcome_family {
            OutcomeFamily::Continuous => tau,
            OutcomeFamily::Binary => {
                // b'X = sqrt(p) u since b = sqrt(p) a.
                let base = c.baseline_index(self.root_p * u, x1);
                logistic(base + tau) - logistic(base)
            }
        };
        (e, effect)
    }

    /// Does anything depend on `X_1` beyond `u`?
    fn needs_second_axis(&self) -> bool {
        let c = self.config;
        self.perp > 0.0
            && (c.misspecified_propensity
                || (c.misspecified_outcome && c.outcome_family == OutcomeFamily::Binary))
    }
}

/// `E[h(e) tau] / E[h(e)]` for each tilting, using the true score.
pub fn true_estimands(config: &DgpConfig) -> Result<TrueEstimands> {
    config.validate()?;
    let p = config.p as f64;
    let integrand = Integrand {
        config,
        root_p: p.sqrt(),
        perp: (1.0 - 1.0 / p).max(0.0).sqrt(),
    };
    let mut num = [0.0f64; 5];
    let mut den = [0.0f64; 5];
    let mut add = |weight: f64, e: f64, effect: f64| {
        for (k, t) in Tilting::ALL.iter().enumerate() {
            let h = t.eval(e, 1.0 - e);
            num[k] += weight * h * effect;
            den[k] += weight * h;
        }
    };
    if integrand.needs_second_axis() {
        let nodes = simpson_nodes(INTERVALS_2D);
        for &(u, wu) in &nodes {
            for &(v, wv) in &nodes {
                let (e, eff) = integrand.eval(u, v);
                add(wu * wv, e, eff);
            }
        }
    } else {
        for (u, wu) in simpson_nodes(INTERVALS_1D) {
            let (e, eff) = integrand.eval(u, 0.0);
            add(wu, e, eff);
        }
    }
    let value = |k: usize| num[k] / den[k];
    let mut out = TrueEstimands {
        ate: value(0),
        att: value(1),
        ato: value(2),
        matching: value(3),
        entropy: value(4),
    };
    // Centred covariates: the ATE of a continuous outcome is exact.
    if config.outcome_family == OutcomeFamily::Continuous {
        out.ate = config.base_effect;
        if config.heterogeneity == 0.0 || config.overlap == 0.0 {
            out = TrueEstimands {
                ate: config.base_effect,
                att: config.base_effect,
                ato: config.base_effect,
                matching: config.base_effect,
                entropy: config.base_effect,
            };
        }
    }
    Ok(out)
}
