use thiserror::Error;

use crate::exprs::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configured size limit would be exceeded. Not a mathematical failure.
    #[error("resource limit exceeded: {what} would be {needed}, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        needed: u128,
        cap: usize,
    },

    #[error("length mismatch: expected {expected} vertex values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no cell with address {0}")]
    UnknownCell(String),

    #[error("hypothesis ({0}) violated: {1}")]
    Hypothesis(&'static str, String),

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),
}
