use std::path::PathBuf;

use rtdispatch_core::benders::BendersError;
use rtdispatch_core::model::CaseError;
use rtdispatch_core::simulator::SimError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Table { path: PathBuf, message: String },
    #[error("invalid case: {0}")]
    Case(#[from] CaseError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Benders(#[from] BendersError),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Process exit status: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn table(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Table {
            path: path.into(),
            message: message.into(),
        }
    }
}
