//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A data set has no rows without missing cells, so distance-model
    /// training is impossible.
    #[error("no complete rows available")]
    NoCompleteRows,

    /// A masked cell reached a crisp distance computation.
    #[error("missing value in distance computation")]
    MissingValueInDistance,

    /// A column has zero observed values, so its imputation statistic is
    /// undefined.
    #[error("column `{0}` has no observed values")]
    EmptyColumn(String),

    /// Requested more clusters than training rows.
    #[error("k = {k} exceeds the number of rows m = {m}")]
    KTooLarge { k: usize, m: usize },

    /// Fewer than two clusters cannot form a histogram.
    #[error("k = {0} is below the minimum of 2")]
    KTooSmall(usize),

    /// Too few rows to derive a bin count that keeps expected cell counts
    /// above the chi-square guidance threshold.
    #[error("sample of {0} rows is too small (need at least 100)")]
    SampleTooSmall(usize),

    /// The residual-spread formula divides by m - 2.
    #[error("need at least 3 residuals, got {0}")]
    TooFewResiduals(usize),

    /// Fuzzy membership functions divide by the spread.
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    /// After dropping zero-total columns the contingency table has fewer
    /// than two usable columns.
    #[error("contingency table degenerates to fewer than 2 columns")]
    DegenerateTable,

    /// An aggregate operation received nothing to aggregate.
    #[error("empty input")]
    EmptyInput,

    /// Correlation is undefined when either sequence is constant.
    #[error("zero variance in correlation input")]
    ZeroVariance,

    /// Paired sequences of different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A drift kind was applied to a distribution family it cannot shift.
    #[error("drift kind `{kind}` is incompatible with the `{family}` family")]
    IncompatibleDrift { kind: String, family: String },

    /// An operation received fewer rows than it needs.
    #[error("{context}: got {got} rows, need at least {need}")]
    TooFewRows {
        context: &'static str,
        got: usize,
        need: usize,
    },

    /// Structural mismatch between two data sets or between data and a
    /// trained model.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A parameter violated its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Malformed CSV input, with the offending 1-based data row.
    #[error("csv error at data row {row}: {message}")]
    Csv { row: usize, message: String },

    /// A loaded row had every cell missing.
    #[error("data row {0} has every cell missing")]
    DegenerateRow(usize),

    /// An error raised while running a named pipeline configuration.
    #[error("config `{config}`: {source}")]
    Pipeline {
        config: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline configuration that raised it.
    pub fn in_config(self, config: &str) -> Self {
        Error::Pipeline {
            config: config.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
