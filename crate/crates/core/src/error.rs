use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid variable spec: {0}")]
    InvalidSpec(String),

    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("row {row}, column {column}: cannot parse {value:?} as {expected}")]
    Unparseable {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("row {row}, column {column}: category {value:?} outside 1..={levels}")]
    CategoryOutOfRange {
        row: usize,
        column: String,
        value: String,
        levels: u32,
    },

    #[error("row {row}, column {column}: missing value")]
    MissingValue { row: usize, column: String },

    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("dataset is already centered")]
    AlreadyCentered,

    #[error("dataset must be centered before {0}")]
    NotCentered(&'static str),

    #[error("centering of the evaluation data differs from the training centering")]
    CenteringMismatch,

    #[error("empty column")]
    EmptyColumn,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("category {category} of {levels} is absent from the response")]
    AbsentCategory { category: u32, levels: u32 },

    #[error("solver did not converge after {sweeps} sweeps (kkt violation {kkt:.3e})")]
    NonConvergence { sweeps: usize, kkt: f64 },

    #[error("perfect separation detected for the unpenalized multinomial fit")]
    PerfectSeparation,

    #[error("response has zero variance")]
    ZeroVariance,

    #[error("insufficient rows: need at least {needed}, have {available}")]
    InsufficientRows { needed: usize, available: usize },

    #[error("time index is not ordered at row {0}")]
    UnorderedTime(usize),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("coefficient matrix is unstable (spectral radius {0:.4} >= 1)")]
    UnstableVar(f64),

    #[error("missing predictor value for variable {0}")]
    MissingPredictor(usize),

    #[error("degenerate marginal distribution (max probability is 1)")]
    DegenerateMarginal,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::NonConvergence { .. }
            | Error::PerfectSeparation
            | Error::NotPositiveDefinite
            | Error::UnstableVar(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    /// Stable snake_case identifier for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::HeaderMismatch { .. } => "header_mismatch",
            Error::Unparseable { .. } => "unparseable_cell",
            Error::CategoryOutOfRange { .. } => "category_out_of_range",
            Error::MissingValue { .. } => "missing_value",
            Error::SpecMismatch(_) => "spec_mismatch",
            Error::AlreadyCentered => "already_centered",
            Error::NotCentered(_) => "not_centered",
            Error::CenteringMismatch => "centering_mismatch",
            Error::EmptyColumn => "empty_column",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::AbsentCategory { .. } => "absent_category",
            Error::NonConvergence { .. } => "non_convergence",
            Error::PerfectSeparation => "perfect_separation",
            Error::ZeroVariance => "zero_variance",
            Error::InsufficientRows { .. } => "insufficient_rows",
            Error::UnorderedTime(_) => "unordered_time",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::UnstableVar(_) => "unstable_var",
            Error::MissingPredictor(_) => "missing_predictor",
            Error::DegenerateMarginal => "degenerate_marginal",
        }
    }
}
