use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        /// Best iterate reached before giving up.
        best: Vec<f64>,
    },

    #[error("mixed Hessian is not positive definite; strong convexity fails near x = {x:?}")]
    SingularNewtonSystem { x: Vec<f64> },

    #[error("mixed Hessian is singular at the Pareto point")]
    SingularMixedHessian,

    #[error("no variable/objective permutation yields a regular leading minor")]
    NoRegularMinor,

    #[error("differential has corank {0}, expected 1")]
    NotCorankOne(usize),

    #[error("lower-right block of the differential is singular")]
    DBlockSingular,

    #[error("tracker Newton failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("line {}, column {}: {}", e.line(), e.column(), e))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
