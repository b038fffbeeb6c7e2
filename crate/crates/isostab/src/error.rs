use thiserror::Error;

/// Library-wide error type. The CLI maps variants onto exit codes, so every
/// error carries the name of the violated invariant or capability.
#[derive(Error, Debug)]
pub enum Error {
    /// A requested (dimension, mode) or feature combination is not supported.
    #[error("unsupported capability: {0}")]
    Capability(String),

    /// Two fields/grids that must match do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A documented precondition or theorem hypothesis failed.
    #[error("precondition `{name}` violated: {detail}")]
    Precondition { name: String, detail: String },

    /// Geometric degeneracy (e.g. 1+u below the star-shapedness margin).
    #[error("degenerate set: {0}")]
    Degenerate(String),

    /// An iterative solver failed to meet its tolerance.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// Requested spectral degree exceeds the grid's band limit.
    #[error("band limit exceeded: requested degree {requested}, limit {limit}")]
    BandLimit { requested: usize, limit: usize },

    /// Malformed input spec.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn precondition(name: &str, detail: impl Into<String>) -> Self {
        Error::Precondition {
            name: name.to_string(),
            detail: detail.into(),
        }
    }

    /// Exit code convention: 1 I/O or schema, 2 precondition/hypothesis,
    /// 3 solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Schema(_) => 1,
            Error::NonConvergence(_) => 3,
            _ => 2,
        }
    }
}
