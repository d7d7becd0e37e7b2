use thiserror::Error;

/// Errors produced by the solvers, the inversion driver and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("stepsize too large: energy increased over {window} consecutive steps (iteration {iteration})")]
    StepsizeTooLarge { iteration: usize, window: usize },

    #[error("infeasible iterate at iteration {iteration}: barrier value is not finite")]
    InfeasibleIterate { iteration: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("forward solve failed for measurement {index}: {source}")]
    Measurement {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
