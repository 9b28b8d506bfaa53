use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CureError> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum CureError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("no covariate value within bandwidth {h} of x0 = {x0}")]
    AllWeightsZero { x0: f64, h: f64 },

    #[error("sample has no uncensored observation")]
    NoUncensored,

    #[error("estimated cure probability is 1 at x0 = {x0}; latency undefined")]
    CureFractionOne { x0: f64 },

    #[error("covariate is degenerate: {0}")]
    DegenerateCovariate(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("operation requires a continuous covariate")]
    CategoricalCovariate,

    #[error("categorical covariate has {levels} levels; at most 7 are supported")]
    TooManyLevels { levels: usize },

    #[error("estimated censoring survival is zero at tau for subject {index}")]
    GbarZero { index: usize },

    #[error("only {valid} of {total} bootstrap resamples usable at x0 = {x0}")]
    InsufficientResamples { x0: f64, valid: usize, total: usize },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("no rows left after dropping missing values")]
    EmptyAfterFiltering,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl CureError {
    pub fn class(&self) -> ErrorClass {
        use CureError::*;
        match self {
            InvalidArgument(_) => ErrorClass::Usage,
            InvalidSample(_)
            | CategoricalCovariate
            | TooManyLevels { .. }
            | Parse { .. }
            | EmptyAfterFiltering
            | Io { .. }
            | Format { .. } => ErrorClass::Data,
            AllWeightsZero { .. }
            | NoUncensored
            | CureFractionOne { .. }
            | DegenerateCovariate(_)
            | DegenerateSample(_)
            | GbarZero { .. }
            | InsufficientResamples { .. } => ErrorClass::Numerical,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn code(&self) -> &'static str {
        use CureError::*;
        match self {
            InvalidArgument(_) => "invalid_argument",
            InvalidSample(_) => "invalid_sample",
            AllWeightsZero { .. } => "all_weights_zero",
            NoUncensored => "no_uncensored",
            CureFractionOne { .. } => "cure_fraction_one",
            DegenerateCovariate(_) => "degenerate_covariate",
            DegenerateSample(_) => "degenerate_sample",
            CategoricalCovariate => "categorical_covariate",
            TooManyLevels { .. } => "too_many_levels",
            GbarZero { .. } => "gbar_zero",
            InsufficientResamples { .. } => "insufficient_resamples",
            Parse { .. } => "parse_error",
            EmptyAfterFiltering => "empty_after_filtering",
            Io { .. } => "io_error",
            Format { .. } => "format_error",
        }
    }
}

/// Per-point failure recorded inside an estimate instead of aborting the grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointError {
    AllWeightsZero,
    CureFractionOne,
    InsufficientResamples { valid: usize, total: usize },
}
