use std::io;
use std::path::PathBuf;

use labelmask_net::NetError;
use thiserror::Error;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;
pub const EXIT_REJECT: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Net(#[from] NetError),
    #[error("REJECT ({0})")]
    Reject(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] labelmask_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Net(e) if e.is_transport() => EXIT_TRANSPORT,
            CliError::Net(NetError::Io(_)) => EXIT_TRANSPORT,
            CliError::Reject(_) => EXIT_REJECT,
            CliError::File { .. } | CliError::Io(_) => EXIT_IO,
            _ => EXIT_OTHER,
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::File { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
