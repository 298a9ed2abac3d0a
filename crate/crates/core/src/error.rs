use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("generating sequences exhausted: need index {needed}, prefix covers up to {available}; supply a longer generator")]
    PrefixExhausted { needed: usize, available: usize },

    #[error("hypothesis {hypothesis} violated: {detail}")]
    Hypothesis { hypothesis: String, detail: String },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn hypothesis(hypothesis: &str, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            hypothesis: hypothesis.to_string(),
            detail: detail.into(),
        }
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Budget(_) => 4,
            _ => 3,
        }
    }

    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidTree(_) => "invalid_tree",
            Error::PrefixExhausted { .. } => "prefix_exhausted",
            Error::Hypothesis { .. } => "hypothesis",
            Error::OutOfRange(_) => "out_of_range",
            Error::Budget(_) => "budget",
            Error::Numerical(_) => "numerical",
            Error::Config(_) | Error::Json(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
