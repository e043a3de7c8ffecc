//! Crate-wide error type.
//!
//! Errors split into two families, which the CLI maps onto exit codes:
//! malformed inputs (bad matrices, bad parameters, bad files) and numerical
//! failures (solvers that did not converge, singular systems). Inequality
//! *violations* found by the verify suites are not errors; checkers report
//! them as data (`holds = false`) and the CLI turns them into exit code 3.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// Matrix dimensions are not n-by-n.
    #[error("matrix is not square: {rows} rows, {cols} columns")]
    NonSquare {
        /// Number of rows found.
        rows: usize,
        /// Number of columns found (or expected width).
        cols: usize,
    },

    /// A matrix entry is NaN or infinite.
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFiniteEntry {
        /// Row index of the offending entry.
        row: usize,
        /// Column index of the offending entry.
        col: usize,
        /// The offending value.
        value: f64,
    },

    /// A vector entry is NaN or infinite.
    #[error("non-finite value {value} at index {index}")]
    NonFiniteValue {
        /// Index of the offending entry.
        index: usize,
        /// The offending value.
        value: f64,
    },

    /// A probability entry is negative.
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry {
        /// Row index of the offending entry.
        row: usize,
        /// Column index of the offending entry.
        col: usize,
        /// The offending value.
        value: f64,
    },

    /// A row of a transition matrix does not sum to 1 within tolerance.
    #[error("row {row} sums to {sum}, more than {tolerance} away from 1")]
    RowSumOutOfTolerance {
        /// Index of the offending row.
        row: usize,
        /// The row sum found.
        sum: f64,
        /// The tolerance that was applied.
        tolerance: f64,
    },

    /// Two sparse triplets share the same (row, col) key.
    #[error("duplicate triplet key ({row}, {col})")]
    DuplicateTriplet {
        /// Row index of the duplicate key.
        row: usize,
        /// Column index of the duplicate key.
        col: usize,
    },

    /// A triplet index lies outside the declared dimension.
    #[error("triplet index ({row}, {col}) out of bounds for n = {n}")]
    EntryOutOfBounds {
        /// Row index of the offending triplet.
        row: usize,
        /// Column index of the offending triplet.
        col: usize,
        /// Declared dimension.
        n: usize,
    },

    /// A vector has the wrong length for the chain it is used with.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch {
        /// Expected length.
        expected: usize,
        /// Length found.
        got: usize,
    },

    /// Two chains that must share a state space do not.
    #[error("state-space size mismatch: {left} vs {right}")]
    SizeMismatch {
        /// Size of the left operand.
        left: usize,
        /// Size of the right operand.
        right: usize,
    },

    /// A norm or smoothness exponent outside [1, infinity].
    #[error("invalid exponent p = {p}; need 1 <= p <= infinity")]
    InvalidExponent {
        /// The offending exponent.
        p: f64,
    },

    /// A distribution entry is negative.
    #[error("distribution entry {value} at index {index} is negative")]
    DistNegativeEntry {
        /// Index of the offending entry.
        index: usize,
        /// The offending value.
        value: f64,
    },

    /// A distribution does not sum to 1 within tolerance.
    #[error("distribution sums to {sum}, more than {tolerance} away from 1")]
    DistSumOutOfTolerance {
        /// The sum found.
        sum: f64,
        /// The tolerance that was applied.
        tolerance: f64,
    },

    /// mu places mass on a state where pi has none, so mu/pi is infinite.
    #[error("state {state} carries mu-mass but no pi-mass; the density ratio is infinite")]
    UnsupportedMass {
        /// The offending state.
        state: usize,
    },

    /// An operation requiring strictly positive pi met a zero entry.
    #[error("state {state} has zero pi-mass; this operation needs pi > 0 everywhere")]
    ZeroMassState {
        /// The offending state.
        state: usize,
    },

    /// A distribution claimed to be stationary is not, within 1e-8.
    #[error("claimed stationary distribution has residual {residual} > 1e-8")]
    NotStationary {
        /// The l1 residual ||pi P - pi||_1 found.
        residual: f64,
    },

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("no convergence after {iterations} iterations; last residual {residual}")]
    NoConvergence {
        /// Iterations performed.
        iterations: usize,
        /// Residual at the last iterate.
        residual: f64,
    },

    /// The iterative singular-value estimator hit its iteration cap.
    #[error("iterative spectral estimate did not converge after {iterations} iterations")]
    IterativeNoConvergence {
        /// Iterations performed.
        iterations: usize,
    },

    /// The chain admits more than one stationary distribution.
    #[error("stationary distribution is not unique (nullspace dimension {nullspace_dim} at tolerance 1e-8)")]
    NonUniqueStationary {
        /// Dimension of the numerical nullspace of P - I.
        nullspace_dim: usize,
    },

    /// A direct linear solve met a singular or sign-degenerate system.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// A direct solve produced an unusable result.
    #[error("solve failed: {0}")]
    SolveFailure(String),

    /// A dense-only operation was asked for above the dense size limit.
    #[error("state space of size {n} exceeds the dense limit {limit}")]
    DenseLimitExceeded {
        /// Size requested.
        n: usize,
        /// The dense limit.
        limit: usize,
    },

    /// A product-chain state space of 2^bits states would be too large.
    #[error("product chain over {bits} coordinates needs 2^{bits} states; refusing")]
    StateSpaceTooLarge {
        /// Number of product coordinates requested.
        bits: usize,
    },

    /// No corruption satisfying the requested budget exists.
    #[error("corruption budget infeasible: {0}")]
    BudgetInfeasible(String),

    /// A scalar parameter is outside its documented domain.
    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    /// Malformed configuration or CLI input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A JSON document failed to parse or serialize.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    ///
    /// The CLI maps input errors to exit code 1 and everything else
    /// (convergence failures, singular systems) to exit code 2.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. }
                | Error::IterativeNoConvergence { .. }
                | Error::NonUniqueStationary { .. }
                | Error::SingularSystem(_)
                | Error::SolveFailure(_)
        )
    }
}
