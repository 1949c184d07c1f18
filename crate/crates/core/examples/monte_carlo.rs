//! Monte Carlo study from a TOML config: bias, empirical SD, RMSE and
//! interval coverage per analysis. Defaults to the bundled weak-overlap
//! study; pass another config path to run that instead.
//!
//!     cargo run --release --example monte_carlo [config.toml]

use balancing_weights::simulation::{run_monte_carlo, SimulationConfig};

fn main() -> balancing_weights::Result<()> {
    let path = std::env::args().nth(1).unwrap_or(format!(
        "{}/configs/weak_overlap.toml",
        env!("CARGO_MANIFEST_DIR")
    ));
    let config = SimulationConfig::from_path(&path)?;
    let result = run_monte_carlo(
        &config.dgp,
        &config.resolve_analyses()?,
        &config.options(),
        config.harness.replicates,
        config.harness.seed,
    )?;
    println!(
        "n = {}, overlap = {}, {} replicates",
        result.config.n, result.config.overlap, result.replicates
    );
    println!(
        "{:<28} {:>6} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "analysis", "target", "truth", "bias", "emp_sd", "rmse", "coverage"
    );
    for a in &result.analyses {
        println!(
            "{:<28} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>9}",
            a.label,
            a.estimand,
            a.truth,
            a.bias,
            a.empirical_sd,
            a.rmse,
            a.coverage.map_or("-".into(), |c| format!("{c:.3}"))
        );
    }
    Ok(())
}
