use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `Σ + I/2` could not be factorized. Never happens for a physical state.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("integration diverged at t = {t:e}: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("root not found: {0}")]
    RootNotFound(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("cutoff {cutoff} too small: norm deficit {deficit:e}")]
    CutoffTooSmall { cutoff: usize, deficit: f64 },

    #[error("operator construction failed: {0}")]
    Construction(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
