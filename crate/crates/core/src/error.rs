use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A non-finite or out-of-domain numeric input.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// Shape, index or length mismatch between collaborating values.
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid configuration value or unknown key.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input file; `line` is 1-based.
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Model file does not follow the expected layout; `line` is 1-based.
    #[error("model format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    /// The replay buffer holds fewer transitions than requested.
    #[error("replay buffer not ready: {have} stored, {want} requested")]
    NotReady { have: usize, want: usize },

    /// Training produced a non-finite loss.
    #[error("training diverged at episode {episode}: {detail}")]
    Divergence {
        episode: usize,
        detail: String,
        checkpoint: Option<Box<crate::ddpg::ModelParams>>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericDomain(format!("{name} is not finite ({value})")))
    }
}
