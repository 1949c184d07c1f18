//! Weights from every scheme on one confounded sample: effective sample
//! sizes, the largest single weight, and the estimate each scheme targets.

use balancing_weights::estimators::hajek_estimate;
use balancing_weights::simulation::{generate, true_estimands, DgpConfig};
use balancing_weights::weights::{self, Tilting};
use balancing_weights::{propensity, FitOptions, WeightScheme};

fn main() -> balancing_weights::Result<()> {
    // Strong confounding, so a share of scores sits near 0 or 1.
    let config = DgpConfig::new(2000, 3, 2.5, 1.0);
    let data = generate(&config, 42)?;
    let truth = true_estimands(&config)?;
    let fit = propensity::fit(data.design(), &FitOptions::default())?;

    let scores = fit.treated_scores();
    let extreme = scores.iter().filter(|&&e| !(0.05..=0.95).contains(&e)).count();
    println!("{extreme} of {} scores outside [0.05, 0.95]\n", scores.len());

    println!(
        "{:<14} {:>9} {:>9} {:>10} {:>9} {:>9}",
        "scheme", "ess_0", "ess_1", "max_w", "estimate", "truth"
    );
    for scheme in [
        WeightScheme::Iptw,
        WeightScheme::Stabilized,
        WeightScheme::Treated,
        WeightScheme::Overlap,
        WeightScheme::Matching,
        WeightScheme::Entropy,
        WeightScheme::Trimmed { alpha: 0.1 },
    ] {
        let w = weights::compute_weights(&fit, data.design(), scheme)?;
        let est = hajek_estimate(&data, &w, (1, 0))?;
        let max_w = w.weights.iter().cloned().fold(0.0, f64::max);
        let target = match scheme {
            WeightScheme::Trimmed { .. } => "-".to_string(),
            s => format!("{:.4}", truth.get(s.tilting().unwrap_or(Tilting::Ate))),
        };
        println!(
            "{:<14} {:>9.1} {:>9.1} {:>10.3} {:>9.4} {:>9}",
            scheme.to_string(),
            w.ess_per_arm[0],
            w.ess_per_arm[1],
            max_w,
            est.point,
            target
        );
    }
    Ok(())
}
