use thiserror::Error;

use crate::params::ConditionA;

/// Errors raised by the test design, evaluation and monitoring routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The correlation is incompatible with the marginal probabilities.
    #[error("infeasible parameters (theta_x={theta_x}, theta_y={theta_y}, rho={rho}): {violated}")]
    Infeasible {
        theta_x: f64,
        theta_y: f64,
        rho: f64,
        violated: ConditionA,
    },

    /// A covariance matrix that must be positive definite is not.
    #[error("degenerate covariance matrix (determinant {determinant:e})")]
    DegenerateCovariance { determinant: f64 },

    /// The boundary-crossing normal law needs eta^2 > 0.
    #[error("degenerate boundary law: eta^2 = {0:e}")]
    DegenerateEta(f64),

    /// The observation stream ended before the test reached a decision.
    #[error("stream ended after {consumed} events before a decision was reached")]
    StreamUnderflow { consumed: u64 },

    /// Events must carry consecutive sequence numbers.
    #[error("out-of-order event: expected seq {expected}, got {got}")]
    Sequence { expected: u64, got: u64 },

    /// The monitor has already reached a terminal decision.
    #[error("monitor is closed ({0}); no further events are accepted")]
    Closed(String),

    /// A saved monitor state could not be restored.
    #[error("invalid state document: {0}")]
    StateDocument(String),

    /// Division by an estimated proportion equal to zero.
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    /// Two computations that must agree did not.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
