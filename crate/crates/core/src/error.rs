use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported branch {from}-{to}: {reason}")]
    UnsupportedBranch { from: i64, to: i64, reason: String },

    #[error("grid is disconnected: bus {bus} is not reachable from the rest of the grid")]
    Disconnected { bus: i64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("ill-conditioned system of dimension {dimension}: {reason}")]
    IllConditioned { dimension: usize, reason: String },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("cannot fit speedup curve: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. } | Error::Numerical(_) | Error::DegenerateFit(_)
        )
    }
}
