use std::io;

use thiserror::Error;

use crate::wire::ErrorCode;

#[derive(Debug, Error)]
pub enum NetError {
    /// Connection refused, reset, or any other socket failure.
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("timed out waiting for {0}")]
    Timeout(String),
    /// The peer sent something that does not follow the protocol.
    #[error("protocol: {0}")]
    Protocol(String),
    /// The server answered with an ERROR frame.
    #[error("server error {code}: {detail}")]
    Server { code: ErrorCode, detail: String },
    #[error("store: {0}")]
    Store(String),
    #[error(transparent)]
    Core(#[from] labelmask_core::Error),
}

impl NetError {
    /// Failures of the network path itself, as opposed to a well-formed
    /// refusal from a server.
    pub fn is_transport(&self) -> bool {
        matches!(self, NetError::Io(_) | NetError::Timeout(_) | NetError::Protocol(_))
    }
}

pub type Result<T, E = NetError> = std::result::Result<T, E>;
