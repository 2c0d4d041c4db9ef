use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps [`Error::Config`] and [`Error::Io`]/[`Error::Json`] to exit
/// code 3 and everything else to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    /// A rate, composition or parameter is outside the region where the
    /// requested quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("atom limit exceeded: {atoms} atoms (cap {cap}); coarsen the inputs")]
    AtomLimit { atoms: usize, cap: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
