//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by engine builds, evaluations and searches.
#[derive(Debug, Error)]
pub enum Error {
    /// The domain specification is inconsistent (negative radius, hole
    /// touching the boundary, non-unit mesh normals, ...).
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// The boundary collocation fit did not reach the requested tolerance
    /// after exhausting the charge-count ladder.
    #[error("collocation residual {residual:.3e} above tolerance {tol:.3e} after {attempts} refinements")]
    CollocationDivergence {
        residual: f64,
        tol: f64,
        attempts: usize,
    },

    /// Green's function requested at (numerically) coincident points.
    #[error("green function evaluated at coincident points (separation {sep:.3e})")]
    CoincidentPoints { sep: f64 },

    /// A configuration lies outside the admissible set of its regime.
    #[error("configuration outside the admissible set: {0}")]
    ConfigOutsideLambda(String),

    /// The sign of the perturbation parameter does not match the regime.
    #[error("epsilon = {eps:.3e} incompatible with regime requiring sign {expected:+}")]
    IncompatibleSign { eps: f64, expected: i32 },

    /// Iteration limit reached before convergence.
    #[error("no convergence after {iters} iterations (|grad| = {grad_norm:.3e})")]
    MaxIters { iters: usize, grad_norm: f64 },

    /// Newton system could not be solved at the current iterate.
    #[error("singular Hessian encountered during saddle search")]
    SingularHessian,

    /// Classification requested at a point that is not critical.
    #[error("point is not critical: |grad| = {grad_norm:.3e} exceeds tolerance {tol:.3e}")]
    NotCritical { grad_norm: f64, tol: f64 },

    /// Node budget of a quadrature build was exceeded.
    #[error("quadrature budget exceeded: {needed} nodes needed, {budget} allowed")]
    BudgetExceeded { needed: usize, budget: usize },

    /// Malformed JSON input or schema violation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
