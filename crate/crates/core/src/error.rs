use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{0}` not found")]
    MissingColumn(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error at row {row}, column `{column}`: {reason}")]
    Ingestion {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("separation detected: max |linear predictor| = {max_eta:.3} with gradient norm {gradient_norm:.3e}")]
    Separation { max_eta: f64, gradient_norm: f64 },

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        /// Last iterate, intercept first, one block per non-reference arm.
        last_coefficients: Vec<f64>,
    },

    #[error("inference error: {0}")]
    Inference(String),

    #[error("singular bread matrix (condition number {condition:.3e})")]
    SingularBread { condition: f64 },

    #[error("exact balance violated: max standardized difference {0:.3e}")]
    BalanceViolation(f64),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MissingColumn(_)
            | Error::Schema(_)
            | Error::Ingestion { .. }
            | Error::Domain(_)
            | Error::Config(_) => ErrorKind::Validation,
            Error::SingularDesign(_)
            | Error::Separation { .. }
            | Error::NonConvergence { .. }
            | Error::Inference(_)
            | Error::SingularBread { .. }
            | Error::BalanceViolation(_)
            | Error::Simulation(_)
            | Error::Internal(_) => ErrorKind::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }

    /// Short machine-readable tag for JSON error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::Schema(_) => "schema",
            Error::Ingestion { .. } => "ingestion",
            Error::Domain(_) => "domain",
            Error::SingularDesign(_) => "singular_design",
            Error::Separation { .. } => "separation",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Inference(_) => "inference",
            Error::SingularBread { .. } => "singular_bread",
            Error::BalanceViolation(_) => "balance_violation",
            Error::Simulation(_) => "simulation",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Config(_) => "config",
        }
    }
}
