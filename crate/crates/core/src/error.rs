use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {cause}")]
    Io { path: String, cause: std::io::Error },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("loss `{0}` does not satisfy psi(z) - psi(-z) = -z")]
    UnsupportedLoss(String),

    #[error("linear system is singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("class shift decomposition violated: {0}")]
    ClassShift(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("grid cell (sigma multiplier {sigma_mult}, lambda {lambda}), fold {fold}: {source}")]
    Cell {
        sigma_mult: f64,
        lambda: f64,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model format: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            cause: source,
        }
    }
}
