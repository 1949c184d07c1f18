//! Seeded data-generating processes, their population estimands, and a
//! Monte Carlo harness.

mod config;
mod dgp;
mod harness;
mod oracle;

pub use config::SimulationConfig;
pub use dgp::{
    generate, generate_with_scores, DgpConfig, OUTCOME_QUADRATIC, PROPENSITY_QUADRATIC,
};
pub use harness::{
    run_monte_carlo, Analysis, AnalysisSummary, HarnessOptions, PropensityModel,
    ReplicateRecord, SimulationResult, VarianceChoice, MAX_FAILURE_SHARE,
};
pub use oracle::{true_estimands, TrueEstimands};
