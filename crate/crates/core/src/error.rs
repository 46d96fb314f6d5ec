use thiserror::Error;

/// Errors raised by the inference toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("undeclared symbol `{0}`")]
    UndeclaredSymbol(String),

    #[error("duplicate declaration `{0}`")]
    DuplicateSymbol(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("expression is not differentiable at the binding point: {0}")]
    NonDifferentiable(String),

    #[error("unbound symbol `{0}`")]
    Unbound(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column `{0}` is identically zero and cannot be normalized")]
    ZeroColumn(String),

    #[error("the constraint set is empty: {0}")]
    InfeasibleConstraints(String),

    #[error("solver did not converge after {iterations} iterations (best objective {best_objective})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        best_theta: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
