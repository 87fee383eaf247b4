use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("Kraus completeness violated (residual {residual:.3e})")]
    Incomplete { residual: f64 },

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("unknown outcome: {0}")]
    UnknownOutcome(String),

    #[error("unknown registry model: {0}")]
    UnknownRegistry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("channel is not faithful: {0}")]
    NotFaithful(String),

    #[error("enumeration budget exceeded: {words} words > {limit}")]
    Budget { words: f64, limit: f64 },

    #[error("all outcome probabilities vanish (max {max_probability:.3e})")]
    DegenerateOutcomes { max_probability: f64 },

    #[error("filter diverged: outcome {outcome} has probability {probability:.3e} under the estimate")]
    FilterDivergence { outcome: String, probability: f64 },

    #[error("every hypothesis block is incompatible with the observed record at step {step}")]
    AllBlocksFrozen { step: usize },

    #[error("record: {0}")]
    Record(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateOutcomes { .. }
            | Error::FilterDivergence { .. }
            | Error::AllBlocksFrozen { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
