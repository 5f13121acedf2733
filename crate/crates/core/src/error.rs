use thiserror::Error;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty table")]
    EmptyTable,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("all-missing feature `{0}`")]
    AllMissing(String),
    #[error("column `{column}`: cannot parse `{token}` as a number")]
    Parse { column: String, token: String },
    #[error("feature `{feature}` has {found} non-missing values, fewer than the {required} required per bin")]
    TooFewSamples {
        feature: String,
        found: usize,
        required: usize,
    },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("index {index} out of range for index space {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("monotone constraints apply to single-output main effects only")]
    UnsupportedMonotone,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("no uncensored events")]
    NoEvents,
    #[error("cox fit did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("feature `{0}` is not in the model")]
    UnknownFeature(String),
    #[error("pair ({0}, {1}) not selected")]
    PairNotSelected(String, String),
    #[error("unsupported model format version {found} (this build reads {supported}.x)")]
    Version { found: String, supported: u32 },
    #[error("nothing to render")]
    EmptyExport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::NonPositiveGamma(_) | Error::UnsupportedMonotone => {
                ErrorClass::Config
            }
            Error::NonFinite(_) | Error::NoConvergence(_) | Error::RankDeficient => {
                ErrorClass::Numeric
            }
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
