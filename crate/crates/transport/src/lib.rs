//! Networked deployment: share-storing daemons, a line-based wire protocol,
//! and the client that uploads data and delegates programs.

pub mod client;
pub mod error;
pub mod proxy;
pub mod server;
pub mod store;
pub mod wire;

pub use client::{Client, ClientConfig, Connection};
pub use error::{NetError, Result};
pub use server::{spawn, ServerConfig, ServerHandle};
pub use wire::{ErrorCode, Frame, Scheme};
