use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("one treatment arm is empty ({treated} treated, {control} control)")]
    EmptyArm { treated: usize, control: usize },

    #[error("non-finite value in {field} at row {row}")]
    NonFinite { field: String, row: usize },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: String,
        got: usize,
        expected: usize,
    },

    #[error("action at row {row} is {value}, expected 0 or 1")]
    InvalidAction { row: usize, value: f64 },

    #[error("dataset needs at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("invalid stage mask for record {id}: {reason}")]
    InvalidStageMask { id: String, reason: String },

    #[error("root node too small: {treated} treated and {control} control, need {need} per arm")]
    RootTooSmall {
        treated: usize,
        control: usize,
        need: usize,
    },

    #[error("validation count {count} is invalid for an arm of size {arm_size}")]
    ArmExhausted { count: usize, arm_size: usize },

    #[error("degenerate dispersion: {0}")]
    DegenerateDispersion(&'static str),

    #[error("insufficient replications: {0}")]
    InsufficientReps(String),

    #[error("truncation interval [{lo}, {hi}] carries negligible mass")]
    DegenerateInterval { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("split {split}: {source}")]
    Split {
        split: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Innermost error, skipping split and stage context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Split { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Whether the error stems from malformed input data rather than numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self.root(),
            Error::EmptyArm { .. }
                | Error::NonFinite { .. }
                | Error::LengthMismatch { .. }
                | Error::InvalidAction { .. }
                | Error::TooFewRows { .. }
                | Error::UnknownCovariate(_)
                | Error::InvalidStageMask { .. }
                | Error::Schema(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
