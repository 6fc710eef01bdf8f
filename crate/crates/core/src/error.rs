use thiserror::Error;

/// Errors produced by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("triangular factor is singular (diagonal entry {index})")]
    SingularFactor { index: usize },

    #[error("degenerate triangle {triangle} (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("near resonance: LDLt pivot {pivot} has magnitude {magnitude:e}")]
    NearResonance { pivot: usize, magnitude: f64 },

    #[error("background resonance: J'_{order}(k*sqrt(q0)) = {value:e}")]
    BackgroundResonance { order: usize, value: f64 },

    #[error("measurement matrix asymmetry {0:e} exceeds limit")]
    AsymmetryTooLarge(f64),

    #[error("sensitivity matrix is numerically semidefinite (lambda_min = {lambda_min:e})")]
    SemidefiniteSensitivity { lambda_min: f64 },

    #[error("reconstruction support is empty")]
    EmptySupport,

    #[error("data format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
