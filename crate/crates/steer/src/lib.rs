//! Live steering of a packing run over WebSocket.
//!
//! Frames are JSON text messages tagged by `"type"`: the server sends
//! `snapshot` and `error` frames, clients send `command` frames. See
//! [`frame`] for the exact shapes.

pub mod frame;
pub mod service;

pub use frame::{decode, encode, Command, DecodeError, EncodeError, Frame, Snapshot};
pub use service::{snapshot, ServeConfig, ServeError, Service, StatusSink, DEFAULT_PORT};
