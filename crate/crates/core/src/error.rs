use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("stream {target} has no predictors to estimate from")]
    NoPredictors { target: usize },

    #[error("exact scheduling refused: {size} schedulable nodes exceeds the limit of {limit}; use FAST_DTS")]
    ExactLimitExceeded { size: usize, limit: usize },

    #[error("interval {interval}: {source}")]
    AtInterval {
        interval: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep cell (b_exp={b_exp}, rlb_min={rlb_min}): {source}")]
    AtSweepCell {
        b_exp: f64,
        rlb_min: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by a bad configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Toml(_) | Error::ExactLimitExceeded { .. } => true,
            Error::AtInterval { source, .. } | Error::AtSweepCell { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must be finite, got {value}")))
    }
}
