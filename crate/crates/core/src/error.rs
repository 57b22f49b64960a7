//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised anywhere in the estimation/testing pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("unbalanced panel: individual {id:?} has {got} observations, expected {expected}")]
    UnbalancedPanel {
        id: String,
        got: usize,
        expected: usize,
    },

    #[error("duplicate cell: individual {id:?} appears twice at time {time:?}")]
    DuplicateCell { id: String, time: String },

    #[error("missing or non-finite value in column {column:?} (individual {id:?}, time {time:?})")]
    MissingValue {
        column: String,
        id: String,
        time: String,
    },

    #[error("column {0:?} not found in input")]
    ColumnNotFound(String),

    #[error("invalid panel shape: {0}")]
    InvalidPanel(String),

    #[error("basis degree too small: a_n = {0}, need at least 2")]
    DegreeTooSmall(usize),

    #[error("knot {knot} outside the observed support ({min}, {max}) of variable {var}")]
    KnotOutOfRange { var: String, knot: f64, min: f64, max: f64 },

    #[error("null design is not nested in the alternative: column {0:?} missing from the alternative span")]
    NestednessViolation(String),

    #[error("no test directions left after dropping columns (r_n = 0)")]
    EmptyTestSet,

    #[error("restricted design is rank deficient (pivot {pivot} of {cols} below tolerance)")]
    RankDeficientW { pivot: usize, cols: usize },

    #[error("not enough rows to fit: {rows} rows for {cols} columns")]
    InsufficientRows { rows: usize, cols: usize },

    #[error(
        "Omega is numerically singular (min/max eigenvalue ratio {ratio:.3e}); \
         r_n may be too large for this sample or the test directions collinear — try a smaller a_n"
    )]
    SingularOmega { ratio: f64 },

    #[error(
        "Omega for grid candidate a_n = {a_n} is numerically singular (ratio {ratio:.3e}); \
         try a smaller grid maximum"
    )]
    SingularOmegaAt { a_n: usize, ratio: f64 },

    #[error("probability {0} outside the open interval (0, 1)")]
    DomainError(f64),

    #[error("{failed} of {total} bootstrap replicates failed (> 1% tolerance)")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("{failed} of {total} Monte Carlo replications failed (> 1% tolerance)")]
    McFailures { failed: usize, total: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
