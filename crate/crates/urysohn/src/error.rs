//! Error types shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by spline construction, quadrature, assembly and solving.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The weight constraint system of a quasi-interpolation functional has
    /// no solution.
    #[error("quasi-interpolation construction failed for functional {functional}: {detail}")]
    QipConstruction { functional: usize, detail: String },

    /// The kernel (or its derivative) evaluated to NaN or infinity.
    #[error("kernel evaluation is not finite at (s, t) = ({s}, {t})")]
    NonFiniteKernel { s: f64, t: f64 },

    /// A matrix or right-hand-side entry came out non-finite during assembly.
    #[error("non-finite entry at ({row}, {col}) while assembling the linear system")]
    Assembly { row: usize, col: usize },

    /// LU elimination hit a pivot that is zero to working precision.
    #[error("linear system is numerically singular at elimination step {pivot}")]
    Singular { pivot: usize },

    /// The Newton iteration ran out of iterations before the increment
    /// dropped below the configured tolerance.
    #[error("Newton iteration did not converge in {max_iter} steps (last increment {last:.3e})")]
    Divergence {
        max_iter: usize,
        last: f64,
        history: Vec<f64>,
    },

    /// A catalog problem failed its own exact-solution residual gate.
    #[error("problem self-consistency residual {residual:.3e} exceeds {tolerance:.1e}")]
    SelfConsistency { residual: f64, tolerance: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Bad command line or configuration file input.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
