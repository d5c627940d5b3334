use thiserror::Error;

/// Errors raised anywhere in the enrollment / scoring / evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sequence of length {len} is shorter than the {n_states} model states")]
    SequenceTooShort { len: usize, n_states: usize },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch: model expects {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("touch log contains no events")]
    EmptyFile,
    #[error("stroke has {len} events, at least 2 are required")]
    StrokeTooShort { len: usize },
    #[error("normalizer training pool is empty")]
    EmptyPool,

    #[error("{found} training sequences, at least {required} are required")]
    TooFewSequences { found: usize, required: usize },
    #[error("no (states, mixtures) configuration satisfies states * mixtures <= {max_product}")]
    NoFeasibleConfiguration { max_product: usize },

    #[error("window of {window} strokes exceeds the {len} available")]
    WindowLargerThanSequence { window: usize, len: usize },
    #[error("score set is empty")]
    EmptyScoreSet,
    #[error("at least two users are required, found {0}")]
    SingleUserDataset(usize),
    #[error("scenario unsupported by data: {0}")]
    ScenarioUnsupportedByData(String),
    #[error("user not found: {0}")]
    UserNotFound(u32),

    #[error("unsupported document: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyTrainingSet => "EmptyTrainingSet",
            Error::SequenceTooShort { .. } => "SequenceTooShort",
            Error::InvalidDimensions(_) => "InvalidDimensions",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidModel(_) => "InvalidModel",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::EmptyFile => "EmptyFile",
            Error::StrokeTooShort { .. } => "StrokeTooShort",
            Error::EmptyPool => "EmptyPool",
            Error::TooFewSequences { .. } => "TooFewSequences",
            Error::NoFeasibleConfiguration { .. } => "NoFeasibleConfiguration",
            Error::WindowLargerThanSequence { .. } => "WindowLargerThanSequence",
            Error::EmptyScoreSet => "EmptyScoreSet",
            Error::SingleUserDataset(_) => "SingleUserDataset",
            Error::ScenarioUnsupportedByData(_) => "ScenarioUnsupportedByData",
            Error::UserNotFound(_) => "UserNotFound",
            Error::Format(_) => "Format",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NumericalFailure(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
