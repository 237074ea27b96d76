use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A Cholesky pivot fell below the positive-definiteness tolerance.
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("linear system is singular or numerically rank deficient ({0})")]
    SingularSystem(String),

    #[error("interpolant evaluates to a non-positive value at t = {t}")]
    NonPositiveResult { t: f64 },

    /// The fitted rational function has real poles inside the evaluation domain.
    #[error(
        "rational interpolant has real poles {roots:?} inside [{lower}, {upper}]; \
         move the interpolant points slightly to push the poles out"
    )]
    PoleInDomain { roots: Vec<f64>, lower: f64, upper: f64 },

    #[error("t = {t} is below the oscillation floor {floor} of the basis interpolant")]
    BelowDomainFloor { t: f64, floor: f64 },

    /// Node values must decrease strictly with t; stochastic noise can break this.
    #[error(
        "interpolant values are not strictly decreasing at node {index} \
         (t = {t}); increase the number of random vectors"
    )]
    NonMonotoneNodes { index: usize, t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
