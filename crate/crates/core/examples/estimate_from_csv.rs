//! Ingest a CSV with a categorical covariate, fit the propensity model and
//! report the overlap-weighted effect with a sandwich standard error.
//!
//!     cargo run --example estimate_from_csv [data.csv schema.toml]

use balancing_weights::estimators::hajek_estimate;
use balancing_weights::inference::{attach, sandwich_variance};
use balancing_weights::{data, propensity, weights, FitOptions, IngestConfig, WeightScheme};

fn main() -> balancing_weights::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let mut args = std::env::args().skip(1);
    let data_path = args.next().unwrap_or(format!("{root}/data/demo.csv"));
    let schema_path = args.next().unwrap_or(format!("{root}/data/demo.toml"));

    let config = IngestConfig::from_path(&schema_path)?;
    let dataset = data::ingest(&data_path, &config)?;
    let design = dataset.design();
    println!(
        "{} units, covariates {:?}, arms {:?} with counts {:?}",
        dataset.n(),
        design.covariate_names(),
        design.arm_labels(),
        design.arm_counts()
    );

    let fit = propensity::fit(design, &FitOptions::default())?;
    println!(
        "propensity fit: {} Newton iterations, |gradient| = {:.2e}",
        fit.iterations, fit.final_gradient_norm
    );

    let scheme = WeightScheme::Overlap;
    let w = weights::compute_weights(&fit, design, scheme)?;
    let mut est = hajek_estimate(&dataset, &w, (1, 0))?;
    let var = sandwich_variance(&dataset, &fit, scheme, &est)?;
    attach(&mut est, &var, 0.95)?;

    let ci = est.ci.as_ref().expect("interval attached");
    println!(
        "{} = {:.4}  (se {:.4}, 95% CI [{:.4}, {:.4}])",
        est.estimand_label,
        est.point,
        est.se.unwrap_or(f64::NAN),
        ci.lower,
        ci.upper
    );
    Ok(())
}
