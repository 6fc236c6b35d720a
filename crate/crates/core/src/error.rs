//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: relative asymmetry {max_asymmetry:.3e} exceeds tolerance")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {eigenvalue:.6e}")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("scale index must be finite and non-negative, got {gamma}")]
    InvalidScaleIndex { gamma: f64 },

    #[error("exponential action rejected: Re(omega) = {re_omega} > 0 grows at infinity")]
    GrowthRejected { re_omega: f64 },

    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },

    #[error("boundary term evaluation time {t} lies outside the grid [0, {t_max}]")]
    EvaluationOutsideGrid { t: f64, t_max: f64 },

    #[error("power iteration did not converge within {iterations} iterations")]
    PowerIterationDiverged { iterations: usize },

    #[error("boundary operator norm estimate {kappa:.6} is not below 1; solve refused")]
    KappaTooLarge { kappa: f64 },

    #[error("kappa must lie in [0, 1), got {kappa}")]
    KappaOutOfRange { kappa: f64 },

    #[error(
        "fixed-point iteration stopped contracting after {step} steps \
         (residual {residual:.3e}); the operator norm estimate is unreliable"
    )]
    ContractionFailure { step: usize, residual: f64 },

    #[error("equation residual {achieved:.3e} exceeds the allowed {allowed:.3e}")]
    ResidualExceeded { achieved: f64, allowed: f64 },

    #[error("boundary condition `{which}` violated: {achieved:.3e} exceeds {allowed:.3e}")]
    BoundaryConditionViolated { which: &'static str, achieved: f64, allowed: f64 },

    #[error(
        "iteration is not contracting: ratio {ratio:.4} >= 1 for {consecutive} consecutive steps"
    )]
    NotContracting { ratio: f64, consecutive: usize },

    #[error("iteration cap of {cap} solves exceeded (last update {last_update:.3e})")]
    IterationCapExceeded { cap: usize, last_update: f64 },

    #[error("problem is not certified solvable (alpha = {alpha:.4}); pass force to override")]
    NotCertified { alpha: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("imaginary residue {magnitude:.3e} exceeds {allowed:.3e} of the field magnitude")]
    ImaginaryResidue { magnitude: f64, allowed: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
