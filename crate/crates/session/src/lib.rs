//! Live sessions over a length-prefixed JSON wire protocol.
//!
//! A [`Connection`] turns client messages (gaze samples, trigger pulls,
//! rotations, mode changes) into server messages (predictions, effector tip
//! motion, world state, outcomes). Sessions are recorded as JSONL logs that
//! replay to the identical server stream.

pub mod driver;
pub mod log;
pub mod protocol;
pub mod server;
pub mod session;

pub use driver::{drive, synthetic_script, DriveReport, Transport};
pub use log::{replay, LogError, SessionLog};
pub use protocol::{ClientMessage, ServerMessage, SessionSummary, PROTOCOL_VERSION};
pub use server::{Client, Server};
pub use session::{open_session, telemetry_hash, Connection, Session, SessionConfig, SessionError};
