//! Crate-wide error type.
//!
//! Variants are grouped by the stage that raises them; the CLI maps them onto
//! process exit codes (contract violations vs. evolution-window violations).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Metric or chart parameters outside their admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// No Killing mix coefficient in the scanned range makes K timelike on
    /// the requested locus. Carries the best candidate for diagnostics.
    #[error(
        "no timelike Killing mix in [{b_min}, {b_max}]: best b = {best_b} \
         still has min <K,K> = {best_margin:.6e} on the boundary"
    )]
    TimelikeMixInfeasible {
        b_min: f64,
        b_max: f64,
        best_b: f64,
        best_margin: f64,
    },

    /// The Gaussian chart lost injectivity (focussing or crossing normal
    /// geodesics) before reaching the requested depth.
    #[error(
        "gaussian chart not injective at depth {failed_at:.6}: {detail}; \
         shrink the collar depth below {suggested:.6}"
    )]
    ChartNotInjective {
        failed_at: f64,
        suggested: f64,
        detail: String,
    },

    /// A frame or metric block became degenerate where it must not.
    #[error("degenerate structure: {0}")]
    Degenerate(String),

    /// Grid construction or node addressing failed validation.
    #[error("grid error: {0}")]
    Grid(String),

    /// Initial data violates a stated support or compatibility requirement.
    #[error("invalid initial data: {0}")]
    InitialData(String),

    /// The collar region is invalid (horizon inside, Killing field not
    /// timelike, or empty node set).
    #[error("collar region error: {0}")]
    Region(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("{solver} did not converge: relative residual {relres:.3e} after {iters} iterations")]
    SolverStalled {
        solver: &'static str,
        relres: f64,
        iters: usize,
    },

    /// Evolution window hypothesis violated: a field component exceeded the
    /// admissible amplitude at a guarded locus during a window.
    #[error(
        "window violation in window {window} at t = {time:.6}: {locus} \
         amplitude {amplitude:.3e} exceeds threshold {threshold:.3e}"
    )]
    WindowViolation {
        window: usize,
        time: f64,
        locus: String,
        amplitude: f64,
        threshold: f64,
    },

    /// Dense linear algebra backend failure.
    #[error("linear algebra backend: {0}")]
    Backend(String),

    /// A runtime self-check of a mathematical invariant failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
