//! Line-delimited JSON protocol for agents running in another process.
//!
//! See `docs/bridge-protocol.md` for the message schema and example sessions.

mod client;
mod protocol;
mod server;

pub use client::{BridgeAgent, BridgeFactory, Connection, Endpoint};
pub use protocol::{BridgeMessage, MessageKind, PROTOCOL_VERSION};
pub use server::{serve, AgentMaker};

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("no reply from remote agent within {0:?}")]
    Timeout(Duration),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("protocol version mismatch: expected v{expected}, got v{got}")]
    VersionMismatch { expected: u32, got: u64 },
    #[error("sequence mismatch: expected {expected}, got {got}")]
    SequenceMismatch { expected: u64, got: u64 },
    #[error("session mismatch: expected {expected:?}, got {got:?}")]
    SessionMismatch { expected: String, got: String },
    #[error("expected {expected}, got {got}")]
    UnexpectedKind { expected: &'static str, got: &'static str },
    #[error("remote agent error: {0}")]
    Remote(String),
    #[error("bad endpoint: {0}")]
    Endpoint(String),
    #[error("connection closed by remote agent")]
    Closed,
    #[error("bridge i/o: {0}")]
    Io(#[from] std::io::Error),
}
