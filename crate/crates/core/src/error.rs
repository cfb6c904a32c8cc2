use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Too few observations receive positive kernel weight at the requested point.
    #[error("degenerate neighborhood at z = {z:?}: kernel window is empty or nearly so")]
    DegenerateNeighborhood { z: Vec<f64> },

    /// `1 - sum w_i^2` fell below the guard used by the conditional Kendall's tau.
    #[error("effective sample too small at z = {z:?}: 1 - sum w^2 = {denominator:.3e}")]
    EffectiveSampleTooSmall { z: Vec<f64>, denominator: f64 },

    /// Some design points could not be estimated.
    #[error("estimation failed at {} design point(s); first: {first}", failed.len())]
    DesignPointFailures { failed: Vec<usize>, first: Box<Error> },

    #[error("dimension {d} too large (at most {max} supported)")]
    DimensionTooLarge { d: usize, max: usize },

    #[error("invalid vine structure: {0}")]
    InvalidStructure(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by empty or too-thin kernel windows.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Error::DegenerateNeighborhood { .. } | Error::EffectiveSampleTooSmall { .. } => true,
            Error::DesignPointFailures { first, .. } => first.is_degenerate(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
