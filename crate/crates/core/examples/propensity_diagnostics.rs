//! Propensity fitting and its failure modes: a clean fit, a perfectly
//! separated sample, and the same sample with a ridge penalty.

use balancing_weights::{propensity, Dataset, Error, FitOptions, OutcomeFamily};
use nalgebra::DMatrix;

fn main() -> balancing_weights::Result<()> {
    let x: Vec<f64> = (0..40).map(|i| i as f64 / 4.0 - 5.0).collect();
    let overlapping: Vec<usize> = x.iter().enumerate().map(|(i, &v)| usize::from(v + (i % 3) as f64 > 0.0)).collect();
    let separated: Vec<usize> = x.iter().map(|&v| usize::from(v > 0.0)).collect();

    for (name, z) in [("overlapping", overlapping), ("separated", separated)] {
        let data = Dataset::from_parts(
            DMatrix::from_column_slice(40, 1, &x),
            vec!["x".into()],
            z,
            2,
            vec![0.0; 40],
            OutcomeFamily::Continuous,
        )?;
        match propensity::fit(data.design(), &FitOptions::default()) {
            Ok(fit) => println!(
                "{name}: coefficients {:.4?}, {} iterations",
                fit.coefficients, fit.iterations
            ),
            Err(err @ Error::Separation { .. }) => {
                println!("{name}: {err}");
                let ridge = FitOptions { ridge: 1.0, ..FitOptions::default() };
                let fit = propensity::fit(data.design(), &ridge)?;
                println!(
                    "{name} with ridge {}: coefficients {:.4?}, scores in [{:.3}, {:.3}]",
                    fit.ridge,
                    fit.coefficients,
                    fit.treated_scores().iter().cloned().fold(1.0, f64::min),
                    fit.treated_scores().iter().cloned().fold(0.0, f64::max)
                );
            }
            Err(err) => return Err(err),
        }
    }
    Ok(())
}
