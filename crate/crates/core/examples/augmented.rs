//! Doubly robust estimation: the augmented estimator stays on target when
//! either the propensity model or the outcome model is misspecified.

use balancing_weights::estimators::{augmented_estimate, fit_outcome_regression, hajek_estimate};
use balancing_weights::simulation::{generate, true_estimands, DgpConfig};
use balancing_weights::{propensity, weights, FitOptions, WeightScheme};

fn average(config: &DgpConfig, reps: u64) -> balancing_weights::Result<(f64, f64)> {
    let (mut hajek, mut aug) = (0.0, 0.0);
    for seed in 0..reps {
        let data = generate(config, seed)?;
        let fit = propensity::fit(data.design(), &FitOptions::default())?;
        let w = weights::compute_weights(&fit, data.design(), WeightScheme::Iptw)?;
        hajek += hajek_estimate(&data, &w, (1, 0))?.point;
        let om = fit_outcome_regression(&data, data.family())?;
        aug += augmented_estimate(&data, &fit, WeightScheme::Iptw, &om)?.point;
    }
    Ok((hajek / reps as f64, aug / reps as f64))
}

fn main() -> balancing_weights::Result<()> {
    let mut base = DgpConfig::new(2000, 3, 1.0, 0.0);
    let truth = true_estimands(&base)?.ate;
    println!("true ATE {truth:.4}");
    println!("{:<34} {:>10} {:>10}", "scenario", "IPTW", "augmented");
    for (label, wrong_ps, wrong_om) in [
        ("both models correct", false, false),
        ("propensity misspecified", true, false),
        ("outcome misspecified", false, true),
    ] {
        base.misspecified_propensity = wrong_ps;
        base.misspecified_outcome = wrong_om;
        let (h, a) = average(&base, 50)?;
        println!("{label:<34} {h:>10.4} {a:>10.4}");
    }
    Ok(())
}
