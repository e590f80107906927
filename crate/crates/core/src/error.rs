use thiserror::Error;

/// Errors produced by the learners, kernels and generators in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-contract input.
    #[error("invalid input: {0}")]
    Input(String),

    /// A request exceeding a fixed desk-scale capacity guard.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An approximation that could not be certified by its audit.
    #[error("construction failed: {0}")]
    Construction(String),

    /// Training produced a non-finite quantity.
    #[error("divergence at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    /// The oracle query budget would be exceeded.
    #[error("query budget exhausted: {used} used, {requested} more requested, limit {limit}")]
    Budget { used: u64, requested: u64, limit: u64 },

    /// Operation not available for this kind of data.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A concept generator emitted an out-of-range value or could not sample.
    #[error("concept error: {0}")]
    Concept(String),

    /// Experiment configuration errors.
    #[error("config error: {0}")]
    Config(String),

    /// Reading or writing experiment files failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case tag for structured error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Capacity(_) => "capacity",
            Error::Construction(_) => "construction",
            Error::Divergence { .. } => "divergence",
            Error::Budget { .. } => "budget",
            Error::Unsupported(_) => "unsupported",
            Error::Concept(_) => "concept",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
