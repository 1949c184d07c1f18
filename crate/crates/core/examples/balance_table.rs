//! Covariate balance before and after weighting, the exact-balance
//! property of overlap weights, and a propensity-score histogram. Only the
//! design is loaded: outcomes play no part in these diagnostics.

use balancing_weights::balance::{self, EXACT_BALANCE_TOL};
use balancing_weights::{data, propensity, weights, FitOptions, IngestConfig, WeightScheme};

fn main() -> balancing_weights::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let config = IngestConfig::from_path(format!("{root}/data/demo.toml"))?;
    let design = data::ingest_design(format!("{root}/data/demo.csv"), &config)?;
    let fit = propensity::fit(&design, &FitOptions::default())?;

    for scheme in [WeightScheme::Iptw, WeightScheme::Overlap] {
        let w = weights::compute_weights(&fit, &design, scheme)?;
        let report = balance::balance_report(&design, &w, (1, 0))?;
        println!("== {scheme}");
        println!("{:<12} {:>12} {:>12}", "covariate", "raw SMD", "weighted");
        for c in &report.covariates {
            println!("{:<12} {:>12.4} {:>12.2e}", c.covariate, c.unweighted_smd, c.weighted_smd);
        }
        println!();
    }

    let exact = balance::assert_exact_balance(&design, &fit, EXACT_BALANCE_TOL)?;
    println!(
        "overlap weights: max |mean difference| = {:.2e} (standardized {:.2e})\n",
        exact.max_abs_difference, exact.max_standardized_difference
    );

    let w = weights::compute_weights(&fit, &design, WeightScheme::Overlap)?;
    print!("{}", balance::baseline_table(&design, Some(&w))?.to_csv_string()?);

    println!("\nscore histogram (control | treated):");
    for bin in balance::ps_histogram(&design, &fit, 1, 10)? {
        println!(
            "[{:.1}, {:.1})  {:<30}| {}",
            bin.lower,
            bin.upper,
            "#".repeat(bin.counts[0] / 2),
            "#".repeat(bin.counts[1] / 2)
        );
    }
    Ok(())
}
