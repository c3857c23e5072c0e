use thiserror::Error;

/// Errors produced anywhere in the evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}{}", context_suffix(.context))]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: Option<String>,
    },
    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: usize },
    #[error("cohort too small: {n} learners (need at least 2)")]
    CohortTooSmall { n: usize },
    #[error("duplicate learner id '{0}'")]
    DuplicateId(String),
    #[error("learner id must be non-empty")]
    EmptyId,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing field '{field}' at line {line}")]
    MissingField { field: String, line: usize },
    #[error("no learner survives the cohort filter")]
    EmptyCohort,
    #[error("no records for learner '{0}'")]
    NoRecordsForLearner(String),
    #[error("cannot project an empty vector")]
    EmptyVector,
    #[error("schema block '{block}' requires field '{field}' which is missing")]
    SchemaFieldMissing { block: String, field: String },
    #[error("schema declares {declared} dimensions but its blocks sum to {actual}")]
    SchemaDimension { declared: usize, actual: usize },
    #[error("neighbor threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),
    #[error("k = {k} exceeds the number of points ({n})")]
    KExceedsN { k: usize, n: usize },
    #[error("partition has fewer than 2 non-empty clusters")]
    DegeneratePartition,
    #[error("no learner has two or more instances; cannot form same-learner pairs")]
    NoPositivePairs,
    #[error("fewer than two learners; cannot form cross-learner pairs")]
    NoNegativePairs,
    #[error("scores carry a single class; ROC-AUC is undefined")]
    SingleClass,
    #[error("length mismatch: {left} scores vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("reports cover different learner cohorts")]
    CohortMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            expected,
            found,
            context: None,
        }
    }

    /// True for failures caused by the cohort's shape rather than by malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::CohortTooSmall { .. }
                | Error::EmptyCohort
                | Error::KExceedsN { .. }
                | Error::DegeneratePartition
                | Error::NoPositivePairs
                | Error::NoNegativePairs
                | Error::SingleClass
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
