use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The last scheme already exceeds the threshold at the end-of-life density.
    #[error(
        "end-of-life infeasible: last scheme exceeds the threshold at d1 (last compliant density: {})",
        .last_compliant.map(|d| format!("{d:.6}")).unwrap_or_else(|| "none".into())
    )]
    EndOfLife { last_compliant: Option<f64> },

    #[error("degenerate certificate: {0}")]
    Degenerate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::EndOfLife { .. })
    }
}
