//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by construction and analysis routines.
#[derive(Debug, Error)]
pub enum MargextError {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix entry was NaN or infinite; such values are rejected at
    /// construction so every later operation can assume finite inputs.
    #[error("non-finite matrix entry at row-major index {0}")]
    NonFiniteEntry(usize),

    /// A square matrix was required.
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare {
        /// Row count of the offending matrix.
        rows: usize,
        /// Column count of the offending matrix.
        cols: usize,
    },

    /// Hermiticity was required but ‖a − a†‖_max exceeded the tolerance.
    #[error("matrix is not Hermitian: max deviation {deviation:e} exceeds tolerance {tol:e}")]
    NotHermitian {
        /// Largest entrywise modulus of a − a†.
        deviation: f64,
        /// Tolerance the deviation was checked against.
        tol: f64,
    },

    /// An eigenvalue fell significantly below zero where a positive
    /// semidefinite operator was required.
    #[error("matrix has a significantly negative eigenvalue: {0:e}")]
    NegativeEigenvalue(f64),

    /// The operator fails the density-matrix invariants (unit trace,
    /// Hermiticity, positivity).
    #[error("not a valid density matrix: {0}")]
    InvalidDensity(String),

    /// A basis matrix was required to be unitary.
    #[error("basis is not unitary: max deviation {0:e} from B\u{2020}B = identity")]
    NotUnitary(f64),

    /// Claimed eigenbasis columns are not eigenvectors of the given operator.
    #[error("basis column {col} is not an eigenvector: residual {residual:e}")]
    NotEigenbasis {
        /// Index of the offending column.
        col: usize,
        /// ‖ρ·column − r·column‖_max for the best eigenvalue estimate r.
        residual: f64,
    },

    /// The marginal constraints tr₂(ϱ) = ρ₁ and tr₁(ϱ) = ρ₂ (or their
    /// Kraus-sum equivalents) are violated beyond tolerance.
    #[error("marginal constraints violated: residuals {residual1:e}, {residual2:e}")]
    MarginalViolation {
        /// Max-norm residual against the first marginal.
        residual1: f64,
        /// Max-norm residual against the second marginal.
        residual2: f64,
    },

    /// The operators of a Kraus family must be linearly independent.
    #[error("Kraus family is not linearly independent: rank {rank} < {ell} operators")]
    DependentKrausFamily {
        /// Numerical rank of the stacked, vectorized operators.
        rank: usize,
        /// Number of operators supplied.
        ell: usize,
    },

    /// Neither Hermitization of a kernel coefficient matrix annihilates the
    /// operator products within tolerance; the kernel is numerically invalid.
    #[error("kernel candidate fails annihilation: residual {residual:e} exceeds {tol:e}")]
    KernelAnnihilationFailure {
        /// Best achieved annihilation residual.
        residual: f64,
        /// Tolerance the residual was checked against.
        tol: f64,
    },

    /// A constructed witness violates one of its own invariants; this signals
    /// an internal numerical failure rather than bad user input.
    #[error("witness construction failed: {0}")]
    WitnessConstructionFailure(String),

    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, MargextError>;
