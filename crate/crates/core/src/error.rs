use thiserror::Error;

/// Errors produced by the identification and optimization pipeline.
///
/// Variants are grouped by how the CLI maps them to exit codes: bad user
/// input, missing artifacts, and numerical failures are kept distinct.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("degenerate oscillation: {0}")]
    DegenerateOscillation(String),

    #[error("phase map is not monotone: {0}")]
    NonMonotonePhase(String),

    #[error("phase window {window} of {windows} received no samples")]
    EmptyWindow { window: usize, windows: usize },

    #[error("window {window}: {samples} samples cannot determine {regressors} regressors")]
    UnderDetermined {
        window: usize,
        samples: usize,
        regressors: usize,
    },

    #[error("shape limit violated at t = {t}: {detail}")]
    ShapeLimit { t: f64, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics rather than of the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateOscillation(_)
                | Error::NonMonotonePhase(_)
                | Error::EmptyWindow { .. }
                | Error::UnderDetermined { .. }
                | Error::ShapeLimit { .. }
                | Error::Numerical(_)
        )
    }
}
