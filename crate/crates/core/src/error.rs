use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution failed validation (probabilities, values, support).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// An argument was outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A computed quantity left the representable floating-point range.
    #[error("numeric overflow: {0}")]
    Overflow(String),

    /// An exact computation would exceed the configured support cap.
    /// Callers should fall back to Monte Carlo estimation.
    #[error("support cap exceeded: needed {needed}, cap {cap}")]
    SupportCapExceeded { needed: usize, cap: usize },

    /// A root-finding problem has no solution (e.g. all-zero variables).
    #[error("no root: {0}")]
    NoRoot(String),

    /// An iterative method ran out of iterations before converging.
    #[error("did not converge: {0}")]
    NoConvergence(String),

    /// The LP solver hit an internal numerical inconsistency.
    #[error("numerical failure in LP solve: {0}")]
    Numerical(String),

    /// A rounding or matching step received input violating its contract.
    #[error("invalid rounding input: {0}")]
    InvalidInput(String),

    /// The bipartite matching has no job-perfect solution.
    #[error("matching infeasible: {0}")]
    MatchingInfeasible(String),

    /// The bisection over the objective estimate could not bracket a
    /// feasible value.
    #[error("bracket failure: {0}")]
    BracketFailure(String),

    /// A user-supplied oracle returned inconsistent answers.
    #[error("inconsistent oracle: {0}")]
    InconsistentOracle(String),

    /// Instance or report files failed schema validation.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// JSON parse failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// File I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
