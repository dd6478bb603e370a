//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors raised by construction, composition, and integration.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A vector had the wrong length for the declared system dimensions.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A constructor rejected an invalid parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Feedthrough matrix is not symmetric.
    #[error("feedthrough matrix of `{label}` is not symmetric")]
    AsymmetricFeedthrough { label: String },

    /// The declared output Jacobian disagrees with a finite-difference probe.
    #[error(
        "output Jacobian of `{label}` disagrees with finite differences at a sampled state \
         (relative error {rel_err:.3e} at entry ({row},{col}))"
    )]
    JacobianMismatch {
        label: String,
        row: usize,
        col: usize,
        rel_err: f64,
    },

    /// A storage function does not vanish at the origin.
    #[error("storage function for `{label}` has V(0) = {value:.3e}, expected 0")]
    StorageNotZeroAtOrigin { label: String, value: f64 },

    /// Graph topology validation failure.
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    /// Network assembly validation failure.
    #[error("assembly error: {0}")]
    Assembly(String),

    /// Adaptive step size underflowed; the problem is too stiff for the
    /// configured minimum step.
    #[error("step size underflow at t = {time:.6e} (required step below {min_step:.3e})")]
    StepUnderflow { time: f64, min_step: f64 },

    /// The integrator exceeded its step budget before reaching t_end.
    #[error("integration exceeded {max_steps} steps at t = {time:.6e}")]
    StepBudgetExceeded { time: f64, max_steps: usize },

    /// Invalid integrator configuration.
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
