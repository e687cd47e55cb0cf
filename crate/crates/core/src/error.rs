use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Argument outside the admissible domain of a function (e.g. `s >= b/2` for FENE).
    #[error("domain error: {0}")]
    Domain(String),
    /// Model parameter fails an admissibility condition.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Mismatched or malformed arguments.
    #[error("argument error: {0}")]
    Argument(String),
    /// Density value outside the tabulated response-curve interval.
    #[error("range error: {0}")]
    Range(String),
    /// Non-finite quadrature or other numerical breakdown.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Linear solver failure.
    #[error("solver error: {0}")]
    Solver(String),
    /// The damped fixed-point iteration exhausted its iteration budget.
    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {last:.3e})")]
    NonConvergence { iterations: usize, last: f64, history: Vec<f64> },
    /// The kinetic field dropped below the negativity threshold.
    #[error("negativity: min psi = {min:.3e} below threshold {threshold:.1e}")]
    Negativity { min: f64, threshold: f64 },
    /// Error raised while advancing a given time step.
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
}

impl Error {
    pub fn at_step(self, step: usize) -> Error {
        match self {
            Error::Step { .. } => self,
            other => Error::Step { step, source: Box::new(other) },
        }
    }

    /// Innermost error, unwrapping step context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}
