use std::path::{Path, PathBuf};

use landmark_cascade_core::Error as CoreError;

/// Command failures, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad flags, config files or parameter combinations (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Unreadable or inconsistent input data (exit 3).
    #[error("data error: {0}")]
    Data(String),
    /// A numeric invariant failed during computation (exit 4).
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io { path: path.to_path_buf(), source }
    }

    /// Prefix the message with the file it concerns.
    pub(crate) fn at(self, path: &Path) -> Error {
        let p = path.display();
        match self {
            Error::Config(m) => Error::Config(format!("{p}: {m}")),
            Error::Data(m) => Error::Data(format!("{p}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{p}: {m}")),
            io @ Error::Io { .. } => io,
        }
    }
}

impl From<CoreError> for Error {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidConfig(_)
            | CoreError::InfeasibleBudget { .. }
            | CoreError::ImageTooSmall { .. }
            | CoreError::LandmarkCountMismatch { .. }
            | CoreError::TooFewLandmarks { .. } => Error::Config(msg),
            CoreError::Numeric(_) | CoreError::NotOrthonormal => Error::Numeric(msg),
            _ => Error::Data(msg),
        }
    }
}
