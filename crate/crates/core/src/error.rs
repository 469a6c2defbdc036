use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("invalid ladder: {0}")]
    InvalidLadder(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("projection onto the empty index set is not a measure")]
    EmptyIndexSet,

    #[error("exact variation requires a grid step function")]
    NotAStepFunction,

    #[error("g does not vanish on the lower face x{axis} = {value}")]
    LowerFaceViolation { axis: usize, value: f64 },

    #[error("model `{0}` has no sampler")]
    NoSampler(String),

    #[error("index function `{0}` exposes no gradient")]
    NoGradient(String),

    #[error("no closed-form expectation of `{function}` under `{model}`")]
    NoClosedForm { function: String, model: String },

    #[error("cannot parse `{token}`: {reason}")]
    Parse { token: String, reason: String },

    #[error("non-finite result in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn parse_err(token: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Parse {
        token: token.into(),
        reason: reason.into(),
    }
}
