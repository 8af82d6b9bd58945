//! Error types shared by the solver modules.

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// Vector/matrix/field sizes disagree.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A right-hand side handed to the constrained solve has a component
    /// along the ones vector beyond the stated tolerance.
    #[error("right-hand side not orthogonal to ones: |<rhs,1>| = {overlap:e} exceeds {tol:e}")]
    RhsNotOrthogonal { overlap: f64, tol: f64 },

    /// The mixture matrix degenerates beyond its structural kernel
    /// (some concentration vanished), so the constrained solve is ill-posed.
    #[error("mixture matrix singular beyond its kernel (zero concentration in row {row})")]
    SingularBeyondKernel { row: usize },

    /// A concentration that must be strictly positive is not.
    #[error("non-positive concentration: species {species} at point {point} (value {value:e})")]
    NonPositiveConcentration {
        species: usize,
        point: usize,
        value: f64,
    },

    /// The species-summed gradient of the concentrations is not zero, so
    /// the pointwise velocity solve has no admissible right-hand side.
    #[error("concentration gradient not orthogonal to ones: residual {residual:e} exceeds {tol:e}")]
    GradientNotOrthogonal { residual: f64, tol: f64 },

    /// Initial fluctuation violates the sum-zero/mean-zero compatibility.
    #[error("mass compatibility violated: {reason}")]
    MassCompatibilityViolated { reason: String },

    /// Total concentration crossed zero somewhere.
    #[error("positivity violated at t = {t:e}: min concentration {min_c:e}")]
    PositivityViolated { t: f64, min_c: f64 },

    /// Requested explicit time step exceeds the diffusive stability bound.
    #[error("CFL violated: dt = {dt:e} exceeds stable limit {limit:e}")]
    CflViolated { dt: f64, limit: f64 },

    /// The iterative linear solver did not reach the requested tolerance.
    #[error("linear solve failed: residual {residual:e} after {iters} iterations (tol {tol:e})")]
    LinearSolveFailed {
        residual: f64,
        iters: usize,
        tol: f64,
    },

    /// Too few usable samples for the requested fit.
    #[error("insufficient samples: {got} in window, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// A norm that must be positive for a log fit is not.
    #[error("non-positive norm at t = {t:e}: {value:e}")]
    NonPositiveNorm { t: f64, value: f64 },

    /// Diffusion table entries violate symmetry/positivity.
    #[error("invalid diffusion table: {reason}")]
    InvalidDiffusionTable { reason: String },

    /// Grid parameters out of range.
    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;
