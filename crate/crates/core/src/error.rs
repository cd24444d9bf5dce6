use thiserror::Error;

pub type Result<T> = std::result::Result<T, NetPriceError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetPriceError {
    #[error("singular matrix in {context}: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    SingularMatrix {
        context: String,
        pivot: f64,
        threshold: f64,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("no root of the fixed-point equation on [0,1]: {0}")]
    NoRoot(String),
    #[error("price path decreases at round {round}: {prev} -> {next}")]
    NonMonotonePath { round: usize, prev: f64, next: f64 },
    #[error("infeasible thresholds at t = {t}, group {group}: F(v) = {value}")]
    InfeasibleThresholds { t: usize, group: usize, value: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("no convergence after {iterations} iterations (best value {best_value})")]
    NonConvergence { iterations: usize, best_value: f64 },
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("spectral radius {0} of EA is not below 1")]
    SpectralRadiusTooLarge(f64),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("io: {0}")]
    Io(String),
}

impl NetPriceError {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        NetPriceError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for NetPriceError {
    fn from(e: std::io::Error) -> Self {
        NetPriceError::Io(e.to_string())
    }
}

impl From<csv::Error> for NetPriceError {
    fn from(e: csv::Error) -> Self {
        NetPriceError::Io(e.to_string())
    }
}
