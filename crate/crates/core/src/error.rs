//! Crate-wide error type.
//!
//! All fallible operations return [`Result`]. Variants are deliberately
//! coarse: they distinguish *what kind* of precondition failed (bad
//! experiment description, numerical failure, unsatisfied model assumption)
//! rather than carrying full context, which callers already have.

use alloc::string::String;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A user-supplied coefficient, payoff or barrier returned a non-finite
    /// value on sampled inputs.
    #[error("{what} produced a non-finite value ({value})")]
    InvalidCoefficient { what: &'static str, value: f64 },

    /// The barrier exceeds the terminal payoff at maturity on some sampled
    /// path, violating the compatibility requirement `ψ(T, ·) ≤ φ(·)`.
    #[error("barrier exceeds terminal payoff at maturity by up to {max_violation}")]
    BarrierTerminalConflict { max_violation: f64 },

    /// Non-positive horizon, zero steps, or an otherwise unusable grid.
    #[error("invalid time grid: horizon {horizon}, steps {steps}")]
    InvalidGrid { horizon: f64, steps: usize },

    /// An array argument has the wrong length for the grid or ensemble.
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeError {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The regression normal equations stayed singular even after the ridge
    /// fallback.
    #[error("regression normal equations are singular")]
    SingularRegression,

    /// A nested Monte Carlo request exceeds the configured work budget.
    #[error("nested simulation budget exceeded: {required} > {budget}")]
    BudgetExceeded { required: u64, budget: u64 },

    /// A NaN or infinity appeared in the solution arrays while stepping
    /// backward; `step` is the first grid index (from the terminal side) at
    /// which it was detected.
    #[error("non-finite solution values at grid step {step}")]
    NumericalBlowup { step: usize },

    /// A truncation level is non-positive or levels are not strictly
    /// increasing.
    #[error("invalid truncation level {level}")]
    InvalidLevel { level: f64 },

    /// Truncation of a terminal payoff with infinite second moment requires
    /// `g(·, 0, 0) ≡ 0`; the supplied instance has `|g(t, 0, 0)|` up to
    /// `max_abs`.
    #[error("truncation in the infinite-variance regime requires g(t,0,0) = 0, found |g0| up to {max_abs}")]
    MissingH4 { max_abs: f64 },

    /// Two solutions were produced on different ensembles (or against
    /// different barriers) and cannot be compared path by path.
    #[error("solutions do not share a common ensemble/barrier")]
    EnsembleMismatch,

    /// The lattice oracle only handles scalar noise, `g ≡ 0` and drivers
    /// without `z`-dependence.
    #[error("oracle does not support this instance: {reason}")]
    OracleUnsupported { reason: &'static str },

    /// Unknown reference-catalog identifier.
    #[error("unknown catalog case `{name}`")]
    UnknownCase { name: String },
}
