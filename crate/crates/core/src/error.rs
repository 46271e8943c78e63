//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Exponent vector violates a structural requirement (N >= 1, p_i > 1, ...).
    #[error("invalid exponent data: {0}")]
    InvalidExponent(String),

    /// A required admissibility condition does not hold for the requested operation.
    #[error("condition violated: {0}")]
    ConditionViolated(String),

    /// Grid construction or field/grid mismatch problems.
    #[error("invalid grid or field: {0}")]
    InvalidGrid(String),

    /// Bad scalar parameter (time step, tolerance, truncation level, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Evaluation requested at a point where the expression is singular.
    #[error("singular point: {0}")]
    SingularPoint(String),

    /// An implicit step (or steady-state iteration) failed to converge.
    #[error("solver failed at t = {time}: residual {residual:.3e} after {iters} iterations")]
    SolverFailed {
        time: f64,
        residual: f64,
        iters: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed serialized field / trajectory / config data.
    #[error("parse error: {0}")]
    Parse(String),
}
