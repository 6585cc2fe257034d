//! Newline-delimited JSON protocol for live sessions and its TCP server.
//!
//! A client opens a session, streams `word_event` lines and receives one
//! `decision` per word. `set_controls` is answered with `controls_ack`
//! carrying the applied values.

mod protocol;
mod server;

pub use protocol::{Body, WireMessage, PROTOCOL_VERSION};
pub use server::{handle_connection, Server, ServerHandle, ServiceContext};
