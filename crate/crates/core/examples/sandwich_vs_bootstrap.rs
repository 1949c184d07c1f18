//! The closed-form sandwich standard error next to a seeded nonparametric
//! bootstrap, for several weighting schemes.

use balancing_weights::inference::{bootstrap_variance, sandwich_variance, Recipe};
use balancing_weights::simulation::{generate, DgpConfig};
use balancing_weights::WeightScheme;

fn main() -> balancing_weights::Result<()> {
    let data = generate(&DgpConfig::new(1000, 3, 1.0, 1.0), 7)?;
    println!("{:<10} {:>9} {:>10} {:>10}", "scheme", "estimate", "sandwich", "bootstrap");
    for scheme in [
        WeightScheme::Iptw,
        WeightScheme::Treated,
        WeightScheme::Overlap,
        WeightScheme::Matching,
        WeightScheme::Entropy,
    ] {
        let recipe = Recipe::hajek(scheme);
        let (est, fit) = recipe.run_with_fit(&data)?;
        let sandwich = sandwich_variance(&data, &fit, scheme, &est)?;
        // Same seed, same answer, whatever the thread count.
        let boot = bootstrap_variance(&data, &recipe, 500, 2024)?;
        println!(
            "{:<10} {:>9.4} {:>10.4} {:>10.4}",
            scheme.to_string(),
            est.point,
            sandwich.se,
            boot.se
        );
    }
    Ok(())
}
